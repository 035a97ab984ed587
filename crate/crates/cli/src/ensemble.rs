use funspace_core::logic::{Gate, InputScheme};
use funspace_core::meanfield::{Activation, KernelSpec};
use funspace_core::simulator::{Architecture, EnsembleConfig, Machine};

use crate::{CliError, EnsembleArgs, KernelArgs, MachineKind};

pub fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| CliError::Usage(format!("--{what}: {e}")))
}

/// `lo:hi:count`, inclusive of both ends.
pub fn grid(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("--{flag} expects lo:hi:count, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count < 2 || !(hi > lo) {
        return Err(bad());
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

pub fn kernel(args: &KernelArgs) -> Result<KernelSpec, CliError> {
    let act: Activation = parse("activation", &args.activation)?;
    Ok(match (act, args.sigma_w) {
        (Activation::Relu, None) => KernelSpec::relu(args.sigma_b)?,
        (_, w) => KernelSpec::new(act, w.unwrap_or(1.0), args.sigma_b)?,
    })
}

fn default_config() -> EnsembleConfig {
    EnsembleConfig {
        machine: Machine::Dnn { activation: Activation::Sign, sigma_w: 1.0, sigma_b: 0.0 },
        width: 1000,
        depth: 8,
        n: 2,
        scheme: InputScheme::Biased { c: 1.0 },
        architecture: Architecture::LayerDependent,
        seed: 0,
    }
}

fn default_circuit() -> Machine {
    Machine::Circuit { gate: Gate::majority(3).expect("odd fan-in"), epsilon: 0.0, p_negate: 0.0 }
}

/// Config from `--config` (or defaults) with flag overrides. Without a seed
/// from either source a random one is drawn; callers record it.
pub fn resolve(a: &EnsembleArgs) -> Result<EnsembleConfig, CliError> {
    let (mut cfg, file_seed) = match &a.config {
        Some(path) => {
            let bad = |e: String| CliError::Usage(format!("--config {}: {e}", path.display()));
            let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
            let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            let obj = doc.as_object_mut().ok_or_else(|| bad("expected a JSON object".into()))?;
            // a config without a seed gets a fresh one below
            let has_seed = obj.contains_key("seed");
            obj.entry("seed").or_insert(0.into());
            let cfg = EnsembleConfig::from_json_str(&doc.to_string()).map_err(|e| bad(e.to_string()))?;
            (cfg, has_seed)
        }
        None => (default_config(), false),
    };

    match a.machine {
        Some(MachineKind::Circuit) if cfg.is_dnn() => {
            cfg.machine = default_circuit();
            if a.scheme.is_none() {
                cfg.scheme = InputScheme::Balanced;
            }
        }
        Some(MachineKind::Dnn) if !cfg.is_dnn() => {
            cfg.machine = default_config().machine;
            if a.scheme.is_none() {
                cfg.scheme = InputScheme::Biased { c: 1.0 };
            }
        }
        _ => {}
    }

    match &mut cfg.machine {
        Machine::Dnn { activation, sigma_w, sigma_b } => {
            if a.gate.is_some() || a.epsilon.is_some() || a.p_negate.is_some() {
                return Err(CliError::Usage("--gate, --epsilon and --p-negate apply to circuit machines".into()));
            }
            if let Some(s) = &a.activation {
                *activation = parse("activation", s)?;
            }
            if let Some(b) = a.sigma_b {
                *sigma_b = b;
            }
            match a.sigma_w {
                Some(w) => *sigma_w = w,
                // keep the ReLU normalization when only sigma_b changes
                None if *activation == Activation::Relu => *sigma_w = (2.0 - *sigma_b * *sigma_b).max(0.0).sqrt(),
                None => {}
            }
        }
        Machine::Circuit { gate, epsilon, p_negate } => {
            if a.activation.is_some() || a.sigma_w.is_some() || a.sigma_b.is_some() {
                return Err(CliError::Usage("--activation, --sigma-w and --sigma-b apply to dnn machines".into()));
            }
            if let Some(g) = &a.gate {
                *gate = parse("gate", g)?;
            }
            if let Some(e) = a.epsilon {
                *epsilon = e;
            }
            if let Some(p) = a.p_negate {
                *p_negate = p;
            }
        }
    }
    if let Some(w) = a.width {
        cfg.width = w;
    }
    if let Some(d) = a.depth {
        cfg.depth = d;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = parse("scheme", s)?;
    }
    if let Some(s) = &a.architecture {
        cfg.architecture = parse("architecture", s)?;
    }
    cfg.seed = match a.seed {
        Some(s) => s,
        None if file_seed => cfg.seed,
        None => rand::random(),
    };
    cfg.validate()?;
    Ok(cfg)
}
