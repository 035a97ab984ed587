use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn funspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funspace")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = funspace(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, body)
}

fn manifest(path: &Path) -> serde_json::Value {
    let mut p = path.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kernel_scan_rows_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sign.csv");
    ok(&["kernel-scan", "--activation", "sign", "--sigma-b", "0", "--out", s(&out)]);
    let (h, body) = rows(&out);
    assert_eq!(h, ["q", "q_next"]);
    assert_eq!(body.len(), 201);
    let mid = &body[100];
    assert_eq!(mid[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(mid[1].parse::<f64>().unwrap(), 0.0);
    let m = manifest(&out);
    assert_eq!(m["command"], "kernel-scan");
    assert_eq!(m["outputs"][0], s(&out));
    assert!(m["duration_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["version"].is_string());

    let relu = dir.path().join("relu.csv");
    ok(&["kernel-scan", "--activation", "relu", "--out", s(&relu)]);
    let (_, body) = rows(&relu);
    assert_eq!(body[200][1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn kernel_scan_fixed_point_and_extras() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("k.csv");
    let fp_out = dir.path().join("fp.csv");
    let ov_out = dir.path().join("ov.csv");
    let stdout = ok(&[
        "kernel-scan", "--sigma-b", "1", "--fixed-point", "--fixed-point-scan", "0:1:5", "--fixed-point-out", s(&fp_out), "--depth", "3",
        "--overlaps-out", s(&ov_out), "--out", s(&out),
    ]);
    let q: f64 = stdout.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(q > 0.0 && q < 1.0, "{stdout}");
    assert!(manifest(&out)["results"]["fixed_point"]["q_star"].as_f64().unwrap() > 0.0);
    let (h, body) = rows(&fp_out);
    assert_eq!(h, ["sigma_b", "q_star", "stable"]);
    assert_eq!(body.len(), 5);
    let (h, body) = rows(&ov_out);
    assert_eq!(h, ["layer", "gamma", "gamma_prime", "q"]);
    assert_eq!(body.len(), 4 * 16);
}

#[test]
fn entropy_curves() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sign.csv");
    ok(&["entropy-curve", "--l-max", "6", "--samples", "50000", "--seed", "4", "--out", s(&out)]);
    let (h, body) = rows(&out);
    assert_eq!(h, ["L", "entropy_nats", "entropy_normalized", "samples", "seed"]);
    let e: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(e.len(), 6);
    assert!(e.windows(2).all(|w| w[1] >= w[0]), "{e:?}");
    assert_eq!(manifest(&out)["seed"], 4);

    let and = dir.path().join("and.csv");
    ok(&["entropy-curve", "--machine", "circuit", "--gate", "AND", "--l-max", "10", "--out", s(&and)]);
    let (_, body) = rows(&and);
    assert!(body.last().unwrap()[1].parse::<f64>().unwrap() < 1e-3);

    let sb = dir.path().join("sb.csv");
    ok(&["entropy-curve", "--sigma-b-scan", "0:1:3", "--samples", "20000", "--seed", "1", "--out", s(&sb)]);
    let (h, body) = rows(&sb);
    assert_eq!(h[0], "sigma_b");
    assert_eq!(body.len(), 3);
}

#[test]
fn bits_flag_changes_only_stdout() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let nats = ok(&["entropy-curve", "--machine", "circuit", "--l-max", "1", "--out", s(&a)]);
    let bits = ok(&["--bits", "entropy-curve", "--machine", "circuit", "--l-max", "1", "--out", s(&b)]);
    assert!(nats.contains("nats") && bits.contains("bits"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn circuit_evolve_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("maj.csv");
    let json = dir.path().join("maj.json");
    ok(&["circuit-evolve", "--gate", "MAJ3", "--depth", "3", "--json", s(&json), "--out", s(&out)]);
    let (h, body) = rows(&out);
    assert_eq!(h, ["layer", "f_hex", "p"]);
    let total: f64 = body.iter().filter(|r| r[0] == "3").map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["layers"].as_array().unwrap().len(), 4);

    // one fully noisy layer is uniform
    let noisy = dir.path().join("noisy.csv");
    ok(&["circuit-evolve", "--gate", "AND", "--depth", "1", "--epsilon", "0.5", "--out", s(&noisy)]);
    let (_, body) = rows(&noisy);
    let last: Vec<f64> = body.iter().filter(|r| r[0] == "1").map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(last.len(), 16);
    assert!(last.iter().all(|p| (p - 1.0 / 16.0).abs() < 1e-12));
}

#[test]
fn magnetization_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let map = dir.path().join("map.csv");
    let stdout = ok(&["magnetization", "--gate", "AND", "--map-points", "11", "--map-out", s(&map), "--out", s(&out)]);
    assert!(stdout.starts_with("single function"), "{stdout}");
    let (h, _) = rows(&out);
    assert_eq!(h, ["layer", "gamma", "m"]);
    let (h, body) = rows(&map);
    assert_eq!(h, ["m", "m_next"]);
    assert_eq!(body.len(), 11);
    let stdout = ok(&["magnetization", "--gate", "MAJ3", "--out", s(&out)]);
    assert!(stdout.starts_with("uniform candidate"), "{stdout}");
}

#[test]
fn simulate_estimate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let args = |p: &Path| {
        vec![
            "simulate".to_string(), "estimate".into(), "--width".into(), "50".into(), "--depth".into(), "3".into(), "--realizations".into(),
            "500".into(), "--theory-samples".into(), "20000".into(), "--seed".into(), "9".into(), "--out".into(), s(p).into(),
        ]
    };
    let run = |p: &Path, threads: &str| {
        let mut v = args(p);
        v.extend(["--threads".into(), threads.into()]);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    run(&a, "1");
    run(&b, "3");
    let (ja, jb): (serde_json::Value, serde_json::Value) =
        (serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap(), serde_json::from_slice(&std::fs::read(&b).unwrap()).unwrap());
    assert_eq!(ja, jb);
    assert_eq!(ja["realizations"], 500);
    assert!(ja["kl_to_theory"]["nats"].as_f64().unwrap() >= 0.0);
    assert_eq!(ja["distribution"]["n"], 2);
    assert_eq!(manifest(&a)["seed"], 9);
}

#[test]
fn simulate_estimate_width_sweep_and_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"machine": {"kind": "circuit", "gate": "MAJ3"}, "width": 64, "depth": 4, "n": 2, "scheme": "balanced", "architecture": "recurrent"}"#,
    )
    .unwrap();
    let out = dir.path().join("e.json");
    let sweep = dir.path().join("sweep.csv");
    ok(&[
        "simulate", "estimate", "--config", s(&cfg), "--depth", "3", "--realizations", "300", "--widths", "8,32", "--sweep-out", s(&sweep),
        "--out", s(&out),
    ]);
    let m = manifest(&out);
    assert_eq!(m["config"]["ensemble"]["depth"], 3);
    assert_eq!(m["config"]["ensemble"]["architecture"], "recurrent");
    // no seed anywhere: one is drawn and recorded
    assert!(m["seed"].is_u64());
    let (h, body) = rows(&sweep);
    assert_eq!(h, ["N", "kl_to_theory", "tv_to_theory", "realizations", "seed"]);
    assert_eq!(body.len(), 2);
}

#[test]
fn simulate_overlaps_and_compare() {
    let dir = TempDir::new().unwrap();
    let ov = dir.path().join("ov.csv");
    ok(&["simulate", "overlaps", "--width", "50", "--depth", "2", "--realizations", "20", "--seed", "1", "--out", s(&ov)]);
    let (h, _) = rows(&ov);
    assert_eq!(h, ["l", "l_prime", "gamma", "gamma_prime", "q_hat", "stderr"]);

    let cmp = dir.path().join("cmp.json");
    let stdout = ok(&[
        "simulate", "compare", "--width", "30", "--depth", "3", "--realizations", "2000", "--theory-samples", "50000", "--bootstrap", "50",
        "--null-draws", "50", "--seed", "5", "--out", s(&cmp),
    ]);
    assert!(stdout.contains("TV(layer-dependent, recurrent)"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cmp).unwrap()).unwrap();
    for key in ["tv_between", "null_interval", "bootstrap_ci", "within_null", "seeds", "kl_theory_layer"] {
        assert!(rep.get(key).is_some(), "{key}");
    }
}

#[test]
fn selfcheck_passes_and_reports_singular() {
    let stdout = ok(&["selfcheck"]);
    assert!(stdout.contains("det A_4(0.3) = 0.8281"), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3);
    assert!(!stdout.contains("FAIL"));
    let out = funspace(&["selfcheck", "--kappa", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn usage_errors_exit_one_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    for args in [
        vec!["kernel-scan", "--activation", "tanh", "--out", s(&out)],
        vec!["kernel-scan", "--bogus", "--out", s(&out)],
        vec!["simulate", "estimate", "--gate", "AND", "--out", s(&out)],
        vec!["simulate", "estimate", "--machine", "circuit", "--width", "2", "--out", s(&out)],
        vec!["entropy-curve", "--machine", "circuit", "--sigma-b-scan", "0:1:3", "--out", s(&out)],
        vec!["circuit-evolve", "--epsilon", "0.7", "--out", s(&out)],
    ] {
        let o = funspace(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(!out.exists());
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn numeric_failure_exits_two_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("big.csv");
    // by layer 3 the n = 5 distribution exceeds the exact recursion budget
    let o = funspace(&["circuit-evolve", "--gate", "MAJ3", "--n", "5", "--depth", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn help_exits_zero() {
    assert!(funspace(&["--help"]).status.success());
    assert!(funspace(&["simulate", "compare", "--help"]).status.success());
}
