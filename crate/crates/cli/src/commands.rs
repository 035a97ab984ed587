use std::f64::consts::LN_2;

use nalgebra::SymmetricEigen;
use serde_json::json;

use funspace_core::circuit::{
    circuit_entropy_curve, classify_convergence, evolve_trajectory, trajectory_to_json, write_distribution_trajectory_csv, write_magnetization_csv,
    write_magnetization_map_csv, CircuitEnsembleSpec, ConvergenceKind,
};
use funspace_core::function_space::{
    entropy, entropy_curve, entropy_vs_sigma_b, kl_divergence_smoothed, tv_distance, write_entropy_curve_csv, write_entropy_vs_sigma_b_csv,
    EntropyEstimator, EntropyPoint, DEFAULT_SMOOTHING,
};
use funspace_core::gaussian::{anti_diag_identities, bivariate_orthant, expectation_2d, AntiDiagonalMatrix, Smoothness};
use funspace_core::logic::{Gate, InputScheme};
use funspace_core::meanfield::{find_fixed_point, propagate_overlaps, write_fixed_point_csv, write_kernel_scan_csv, write_overlap_csv, KernelSpec};
use funspace_core::simulator::{
    compare_architectures, estimate_function_distribution, measure_overlaps, theory_distribution, width_sweep, write_overlap_measurement_csv,
    write_width_sweep_csv, Backend, CompareOptions, NodePolicy,
};
use funspace_core::rng::derive_seed;
use funspace_core::Error;

use crate::ensemble::{grid, kernel, parse, resolve};
use crate::output::Run;
use crate::{
    CircuitEvolveArgs, Cli, CliError, Command, EntropyCurveArgs, EstimatorArg, KernelScanArgs, MachineKind, MagnetizationArgs, SamplingArgs,
    SelfcheckArgs, SimulateCommand,
};

type Res = Result<(), CliError>;

struct Units {
    bits: bool,
}

impl Units {
    fn entropy(&self, nats: f64) -> String {
        if self.bits {
            format!("{:.6} bits", nats / LN_2)
        } else {
            format!("{nats:.6} nats")
        }
    }
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> funspace_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn run(cli: Cli) -> Res {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let units = Units { bits: cli.bits };
    match cli.command {
        Command::KernelScan(a) => kernel_scan(a),
        Command::EntropyCurve(a) => entropy_curve_cmd(a, &units),
        Command::CircuitEvolve(a) => circuit_evolve(a, &units),
        Command::Magnetization(a) => magnetization(a),
        Command::Simulate(s) => simulate(s, &units),
        Command::Selfcheck(a) => selfcheck(a),
    }
}

fn kernel_scan(a: KernelScanArgs) -> Res {
    let k = kernel(&a.kernel)?;
    let mut run = Run::new("kernel-scan");
    run.config = json!({ "kernel": k, "points": a.points, "scheme": a.scheme, "n": a.n, "depth": a.depth, "fixed_point_scan": a.fixed_point_scan });
    run.add(&a.out, buffer(|b| write_kernel_scan_csv(b, &k, a.points))?);
    let mut results = serde_json::Map::new();
    if a.fixed_point {
        let fp = find_fixed_point(&k)?;
        println!("q* = {} (stable: {}, slope {:.6})", fp.q_star, fp.stable, fp.derivative);
        results.insert("fixed_point".into(), serde_json::to_value(fp).unwrap_or_default());
    }
    if let (Some(spec), Some(out)) = (&a.fixed_point_scan, &a.fixed_point_out) {
        let rows = grid("fixed-point-scan", spec)?
            .into_iter()
            .map(|sb| {
                let ks = match k.activation() {
                    funspace_core::meanfield::Activation::Relu => KernelSpec::relu(sb)?,
                    act => KernelSpec::new(act, k.sigma_w(), sb)?,
                };
                Ok((sb, find_fixed_point(&ks)?))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        run.add(out, buffer(|b| write_fixed_point_csv(b, &rows))?);
    }
    if let (Some(depth), Some(out)) = (a.depth, &a.overlaps_out) {
        let scheme: InputScheme = parse("scheme", &a.scheme)?;
        let layers = propagate_overlaps(&k, &scheme, a.n, depth + 1)?;
        run.add(out, buffer(|b| write_overlap_csv(b, &layers))?);
    }
    run.results = results.into();
    run.commit()
}

fn estimator(e: EstimatorArg) -> EntropyEstimator {
    match e {
        EstimatorArg::PlugIn => EntropyEstimator::PlugIn,
        EstimatorArg::MillerMadow => EntropyEstimator::MillerMadow,
    }
}

fn entropy_curve_cmd(a: EntropyCurveArgs, units: &Units) -> Res {
    let seed = a.seed.unwrap_or_else(rand::random);
    let est = estimator(a.estimator);
    let mut run = Run::new("entropy-curve");
    match a.machine {
        MachineKind::Dnn => {
            let scheme: InputScheme = parse("scheme", a.scheme.as_deref().unwrap_or("biased"))?;
            if let Some(spec) = &a.sigma_b_scan {
                let k = kernel(&a.kernel)?;
                if k.activation() != funspace_core::meanfield::Activation::Sign {
                    return Err(CliError::Usage("--sigma-b-scan needs the sign activation".into()));
                }
                let sbs = grid("sigma-b-scan", spec)?;
                let pts = entropy_vs_sigma_b(k.sigma_w(), &sbs, a.n, a.samples, seed, est)?;
                for p in &pts {
                    println!("sigma_b = {:.4}: q* = {:.6}, H = {}", p.sigma_b, p.q_star, units.entropy(p.entropy_nats));
                }
                run.config = json!({ "machine": "dnn", "sigma_w": k.sigma_w(), "sigma_b_scan": spec, "n": a.n, "samples": a.samples, "estimator": est });
                run.add(&a.out, buffer(|b| write_entropy_vs_sigma_b_csv(b, &pts))?);
            } else {
                let k = kernel(&a.kernel)?;
                let pts = entropy_curve(&k, &scheme, a.n, a.l_max, a.samples, seed, est)?;
                print_curve(&pts, units);
                run.config = json!({ "machine": "dnn", "kernel": k, "scheme": scheme, "n": a.n, "l_max": a.l_max, "samples": a.samples, "estimator": est });
                run.add(&a.out, buffer(|b| write_entropy_curve_csv(b, &pts))?);
            }
            run.seed = Some(seed);
        }
        MachineKind::Circuit => {
            if a.sigma_b_scan.is_some() {
                return Err(CliError::Usage("--sigma-b-scan applies to dnn machines".into()));
            }
            let scheme: InputScheme = parse("scheme", a.scheme.as_deref().unwrap_or("balanced"))?;
            let gate: Gate = parse("gate", &a.gate)?;
            let spec = CircuitEnsembleSpec::new(gate, a.n, scheme)?.with_noise(a.epsilon, a.p_negate)?;
            let traj = evolve_trajectory(&spec, a.l_max, a.prune)?;
            let pts = circuit_entropy_curve(&traj);
            print_curve(&pts, units);
            run.config = json!({ "machine": "circuit", "gate": spec.gate, "scheme": scheme, "n": a.n, "l_max": a.l_max, "epsilon": a.epsilon, "p_negate": a.p_negate, "prune": a.prune });
            run.add(&a.out, buffer(|b| write_entropy_curve_csv(b, &pts))?);
        }
    }
    run.commit()
}

fn print_curve(pts: &[EntropyPoint], units: &Units) {
    for p in pts {
        println!("L = {:>3}: H = {}", p.depth, units.entropy(p.entropy_nats));
    }
}

fn circuit_evolve(a: CircuitEvolveArgs, units: &Units) -> Res {
    let gate: Gate = parse("gate", &a.gate)?;
    let scheme: InputScheme = parse("scheme", &a.scheme)?;
    let spec = CircuitEnsembleSpec::new(gate, a.n, scheme)?.with_noise(a.epsilon, a.p_negate)?;
    let traj = evolve_trajectory(&spec, a.depth, a.prune)?;
    let last = traj.last().expect("trajectory includes layer 0");
    println!("layer {}: {} functions, H = {}", a.depth, last.support_size(), units.entropy(entropy(last, EntropyEstimator::PlugIn)));
    let mut run = Run::new("circuit-evolve");
    run.config = json!({ "gate": spec.gate, "n": a.n, "scheme": scheme, "depth": a.depth, "epsilon": a.epsilon, "p_negate": a.p_negate, "prune": a.prune });
    run.add(&a.out, buffer(|b| write_distribution_trajectory_csv(b, &traj))?);
    if let Some(path) = &a.json {
        let mut body = serde_json::to_vec_pretty(&trajectory_to_json(&traj)).map_err(|e| CliError::Io(e.to_string()))?;
        body.push(b'\n');
        run.add(path, body);
    }
    run.commit()
}

fn magnetization(a: MagnetizationArgs) -> Res {
    let gate: Gate = parse("gate", &a.gate)?;
    let scheme: InputScheme = parse("scheme", &a.scheme)?;
    let conv = classify_convergence(&gate, &scheme, a.n, a.max_iterations, a.tol)?;
    let kind = match &conv.kind {
        ConvergenceKind::SingleFunction(f) => format!("single function {f}"),
        ConvergenceKind::UniformCandidate => "uniform candidate (all magnetizations at 0)".to_string(),
        ConvergenceKind::Undetermined => "undetermined".to_string(),
    };
    println!("{kind} after {} layers", conv.trajectory.len() - 1);
    let mut run = Run::new("magnetization");
    run.config = json!({ "gate": gate, "n": a.n, "scheme": scheme, "max_iterations": a.max_iterations, "tol": a.tol, "map_points": a.map_points });
    run.results = json!({ "convergence": conv.kind });
    run.add(&a.out, buffer(|b| write_magnetization_csv(b, &conv.trajectory))?);
    if let (Some(points), Some(out)) = (a.map_points, &a.map_out) {
        run.add(out, buffer(|b| write_magnetization_map_csv(b, &gate, points))?);
    }
    run.commit()
}

fn sampling(s: &SamplingArgs) -> Result<(NodePolicy, Backend), CliError> {
    Ok((parse("policy", &s.policy)?, parse("backend", &s.backend)?))
}

fn json_bytes(v: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut body = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    body.push(b'\n');
    Ok(body)
}

fn simulate(cmd: SimulateCommand, units: &Units) -> Res {
    match cmd {
        SimulateCommand::Estimate { ensemble, sampling: s, theory_samples, widths, sweep_out, out } => {
            let cfg = resolve(&ensemble)?;
            let (policy, backend) = sampling(&s)?;
            let est = estimate_function_distribution(&cfg, s.realizations, policy, backend)?;
            let mut doc = est.to_json();
            doc["config"] = serde_json::to_value(&cfg).unwrap_or_default();
            println!("{} functions observed, H = {}", est.distribution.support_size(), units.entropy(entropy(&est.distribution, EntropyEstimator::PlugIn)));
            let mut run = Run::new("simulate estimate");
            let theory = if theory_samples > 0 { Some(theory_distribution(&cfg, theory_samples, derive_seed(cfg.seed, 2))?) } else { None };
            if let Some(t) = &theory {
                let kl = kl_divergence_smoothed(&est.distribution, t, DEFAULT_SMOOTHING)?;
                let tv = tv_distance(&est.distribution, t)?;
                println!("KL to theory {} , TV {tv:.6}", units.entropy(kl.nats));
                doc["kl_to_theory"] = serde_json::to_value(kl).unwrap_or_default();
                doc["tv_to_theory"] = tv.into();
            }
            run.add(&out, json_bytes(&doc)?);
            if let Some(path) = &sweep_out {
                let t = theory.ok_or_else(|| CliError::Usage("--widths needs --theory-samples > 0".into()))?;
                let rows = width_sweep(&cfg, &widths, s.realizations, policy, backend, &t)?;
                for r in &rows {
                    println!("N = {:>7}: KL {} , TV {:.6}", r.width, units.entropy(r.kl_to_theory.nats), r.tv_to_theory);
                }
                run.add(path, buffer(|b| write_width_sweep_csv(b, &rows))?);
            }
            run.config = json!({ "ensemble": cfg, "realizations": s.realizations, "policy": policy, "backend": backend, "theory_samples": theory_samples, "widths": widths });
            run.seed = Some(cfg.seed);
            run.commit()
        }
        SimulateCommand::Overlaps { ensemble, realizations, out } => {
            let cfg = resolve(&ensemble)?;
            let rows = measure_overlaps(&cfg, realizations)?;
            let mut run = Run::new("simulate overlaps");
            run.config = json!({ "ensemble": cfg, "realizations": realizations });
            run.seed = Some(cfg.seed);
            run.add(&out, buffer(|b| write_overlap_measurement_csv(b, &rows))?);
            run.commit()
        }
        SimulateCommand::Compare { ensemble, sampling: s, theory_samples, bootstrap, null_draws, out } => {
            let cfg = resolve(&ensemble)?;
            let (policy, backend) = sampling(&s)?;
            let opts = CompareOptions { realizations: s.realizations, theory_samples, bootstrap, null_draws, policy, backend };
            let rep = compare_architectures(&cfg, &opts)?;
            println!(
                "TV(layer-dependent, recurrent) = {:.6}; null 95% interval [{:.6}, {:.6}]; within: {}",
                rep.tv_between, rep.null_interval[0], rep.null_interval[1], rep.within_null
            );
            let mut run = Run::new("simulate compare");
            run.config = json!({ "ensemble": cfg, "options": opts });
            run.seed = Some(cfg.seed);
            run.results = json!({ "within_null": rep.within_null });
            run.add(&out, json_bytes(&serde_json::to_value(&rep).map_err(|e| CliError::Io(e.to_string()))?)?);
            run.commit()
        }
    }
}

fn check(name: &str, ok: bool, detail: String, failures: &mut usize) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn selfcheck(a: SelfcheckArgs) -> Res {
    let kappas = if a.kappa.is_empty() { (0..19).map(|i| -0.9 + 0.1 * i as f64).collect() } else { a.kappa.clone() };
    let mut failures = 0;

    let a4 = AntiDiagonalMatrix::new(4, 0.3)?;
    println!("det A_4(0.3) = {}", a4.determinant());

    let mut worst: f64 = 0.0;
    for m in [2usize, 4, 8, 16] {
        for &kappa in &kappas {
            let a = AntiDiagonalMatrix::new(m, kappa)?;
            let id = anti_diag_identities(&a).map_err(|e| match e {
                Error::Singular => CliError::Numeric(format!("A_{m}({kappa}) is singular; no inverse")),
                e => e.into(),
            })?;
            let dense = a.to_dense();
            worst = worst.max((dense.clone().determinant() - id.determinant).abs());
            let inv = dense.clone().try_inverse().ok_or_else(|| CliError::Numeric(format!("dense A_{m}({kappa}) not invertible")))?;
            worst = worst.max((inv - &id.inverse).amax());
            let mut ev: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let mut expect: Vec<f64> = id.eigenvalues.iter().flat_map(|&(v, k)| std::iter::repeat_n(v, k)).collect();
            expect.sort_by(f64::total_cmp);
            worst = ev.iter().zip(&expect).fold(worst, |w, (x, y)| w.max((x - y).abs()));
        }
    }
    check("anti-diagonal identities", worst < 1e-10, format!("max |delta| {worst:.2e} over {} kappa values", kappas.len()), &mut failures);

    let mut worst: f64 = 0.0;
    for sb in [0.0, 0.5, 1.0] {
        for k in [KernelSpec::sign(1.0, sb)?, KernelSpec::relu(sb)?] {
            let act = k.activation();
            let v = k.total_variance();
            let (w2, b2) = (k.sigma_w().powi(2), k.sigma_b().powi(2));
            for i in 0..21 {
                let q = -1.0 + 0.1 * i as f64;
                let c = (w2 * q + b2).clamp(-v, v);
                let oracle = expectation_2d(|x, y| act.apply(x) * act.apply(y), &[[v, c], [c, v]], 40, Smoothness::KinkAtZero)?;
                worst = worst.max((k.map(q)? - oracle).abs());
            }
        }
    }
    check("kernel closed form vs quadrature", worst < 1e-8, format!("max |delta| {worst:.2e}"), &mut failures);

    let mut worst: f64 = 0.0;
    for i in 0..21 {
        let rho = -1.0 + 0.1 * i as f64;
        let p = bivariate_orthant(rho)?;
        let q = bivariate_orthant(-rho)?;
        worst = worst.max((p + q - 0.5).abs());
        let cov = [[1.0, rho], [rho, 1.0]];
        let upper = expectation_2d(|x, y| if x >= 0.0 && y >= 0.0 { 1.0 } else { 0.0 }, &cov, 40, Smoothness::KinkAtZero)?;
        let lower = expectation_2d(|x, y| if x < 0.0 && y < 0.0 { 1.0 } else { 0.0 }, &cov, 40, Smoothness::KinkAtZero)?;
        worst = worst.max((upper - p).abs()).max((lower - p).abs());
    }
    check("orthant symmetry", worst < 1e-10, format!("max |delta| {worst:.2e}"), &mut failures);

    if failures > 0 {
        return Err(CliError::Numeric(format!("{failures} self-check(s) failed")));
    }
    Ok(())
}
