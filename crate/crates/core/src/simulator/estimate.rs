use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Backend, EnsembleConfig, Machine, NodePolicy};
use super::lazy_circuit::{self, CircuitScratch};
use super::lazy_dnn::{self, DnnScratch};
use super::realization::{propagate_all_patterns, sample_realization};
use crate::circuit::evolve_trajectory;
use crate::function_space::{
    dnn_function_distribution, kl_divergence_smoothed, tv_distance, DnnMethod, FunctionDistribution, SmoothedKl, DEFAULT_SMOOTHING,
};
use crate::logic::BooleanFunction;
use crate::meanfield::covariance_at_layer;
use crate::rng::{derive_seed, substream};
use crate::schema;
use crate::{Error, Result};

/// Realizations per parallel task.
const REALIZATION_CHUNK: u64 = 256;

/// Empirical distribution of layer-`L` node functions.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    pub distribution: FunctionDistribution,
    pub realizations: u64,
    pub policy: NodePolicy,
    pub backend: Backend,
    /// Samples within one realization are not independent (`AllNodes`).
    pub correlated: bool,
}

impl EmpiricalDistribution {
    pub fn samples(&self) -> u64 {
        match self.distribution.kind() {
            crate::function_space::DistributionKind::MonteCarlo { samples, .. } => samples,
            _ => 0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "distribution": self.distribution.to_json(),
            "realizations": self.realizations,
            "samples": self.samples(),
            "policy": self.policy,
            "backend": self.backend,
            "correlated": self.correlated,
        })
    }
}

/// Layer-`L` codes of realization `r`.
pub(crate) enum Scratch {
    Dnn(DnnScratch),
    Circuit(CircuitScratch),
}

pub(crate) fn realization_codes(cfg: &EnsembleConfig, r: u64, policy: NodePolicy, backend: Backend, scratch: &mut Scratch) -> Result<Vec<u64>> {
    match backend {
        Backend::Dense => {
            let seed = derive_seed(cfg.seed, r);
            let real = sample_realization(cfg, seed)?;
            let outs = propagate_all_patterns(&real, cfg, seed)?.output_functions(cfg.n);
            Ok(match policy {
                NodePolicy::OneNode => vec![outs[0].code()],
                NodePolicy::AllNodes => outs.iter().map(|f| f.code()).collect(),
            })
        }
        Backend::Lazy => {
            let mut rng = substream(cfg.seed, r);
            Ok(match (&cfg.machine, scratch) {
                (Machine::Dnn { .. }, Scratch::Dnn(s)) => lazy_dnn::run(cfg, &cfg.kernel()?, &mut rng, policy, false, s).codes,
                (Machine::Circuit { .. }, Scratch::Circuit(s)) => lazy_circuit::run(cfg, &cfg.circuit_spec()?, &mut rng, policy, s),
                _ => unreachable!("scratch matches the machine"),
            })
        }
    }
}

/// Run `realizations` independent machines; realization `r` draws from
/// stream `r` of `cfg.seed`, so the result is independent of threading.
pub fn estimate_function_distribution(
    cfg: &EnsembleConfig,
    realizations: u64,
    policy: NodePolicy,
    backend: Backend,
) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    if realizations == 0 {
        return Err(Error::invalid("at least one realization is needed"));
    }
    let chunks = realizations.div_ceil(REALIZATION_CHUNK);
    let parts: Vec<Result<HashMap<u64, u64>>> = (0..chunks)
        .into_par_iter()
        .map_init(
            || if cfg.is_dnn() { Scratch::Dnn(DnnScratch::default()) } else { Scratch::Circuit(CircuitScratch::default()) },
            |scratch, c| {
                let mut counts = HashMap::new();
                for r in c * REALIZATION_CHUNK..((c + 1) * REALIZATION_CHUNK).min(realizations) {
                    for code in realization_codes(cfg, r, policy, backend, scratch)? {
                        *counts.entry(code).or_insert(0u64) += 1;
                    }
                }
                Ok(counts)
            },
        )
        .collect();
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for p in parts {
        for (k, v) in p? {
            *counts.entry(k).or_insert(0) += v;
        }
    }
    let n = cfg.n;
    let distribution = FunctionDistribution::from_counts(n, counts.into_iter().map(|(c, k)| (BooleanFunction::from_bits_unchecked(n, c), k)), cfg.seed)?;
    Ok(EmpiricalDistribution { distribution, realizations, policy, backend, correlated: policy == NodePolicy::AllNodes })
}

/// Mean-field prediction for the layer-`L` function distribution.
///
/// DNNs: Monte Carlo orthant sampling of the layer-`L` field covariance with
/// `samples` draws. Circuits: the exact recursion (`samples` and `seed` unused).
pub fn theory_distribution(cfg: &EnsembleConfig, samples: u64, seed: u64) -> Result<FunctionDistribution> {
    cfg.validate()?;
    match &cfg.machine {
        Machine::Dnn { .. } => {
            let cov = covariance_at_layer(&cfg.kernel()?, &cfg.scheme, cfg.n, cfg.depth)?;
            dnn_function_distribution(&cov, DnnMethod::MonteCarlo { samples, seed })
        }
        Machine::Circuit { .. } => Ok(evolve_trajectory(&cfg.circuit_spec()?, cfg.depth, 0.0)?.pop().unwrap()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthSweepRow {
    pub width: usize,
    pub kl_to_theory: SmoothedKl,
    pub tv_to_theory: f64,
    pub realizations: u64,
    pub seed: u64,
}

/// KL and TV of the empirical distribution to `theory` for each width.
pub fn width_sweep(
    cfg: &EnsembleConfig,
    widths: &[usize],
    realizations: u64,
    policy: NodePolicy,
    backend: Backend,
    theory: &FunctionDistribution,
) -> Result<Vec<WidthSweepRow>> {
    widths
        .iter()
        .map(|&w| {
            let c = cfg.with_width(w);
            let e = estimate_function_distribution(&c, realizations, policy, backend)?;
            Ok(WidthSweepRow {
                width: w,
                kl_to_theory: kl_divergence_smoothed(&e.distribution, theory, DEFAULT_SMOOTHING)?,
                tv_to_theory: tv_distance(&e.distribution, theory)?,
                realizations,
                seed: c.seed,
            })
        })
        .collect()
}

pub fn write_width_sweep_csv<W: Write>(out: W, rows: &[WidthSweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::WIDTH_SWEEP)?;
    for r in rows {
        w.write_record([r.width.to_string(), r.kl_to_theory.nats.to_string(), r.tv_to_theory.to_string(), r.realizations.to_string(), r.seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{limit_distribution, support_is_odd, LimitKind};
    use crate::logic::{Gate, InputScheme};
    use crate::meanfield::Activation;
    use crate::simulator::Architecture;

    fn dnn(width: usize, depth: usize, arch: Architecture, sb: f64, scheme: InputScheme) -> EnsembleConfig {
        EnsembleConfig {
            machine: Machine::Dnn { activation: Activation::Sign, sigma_w: 1.0, sigma_b: sb },
            width,
            depth,
            n: 2,
            scheme,
            architecture: arch,
            seed: 17,
        }
    }

    fn circuit(width: usize, depth: usize, arch: Architecture, eps: f64) -> EnsembleConfig {
        EnsembleConfig {
            machine: Machine::Circuit { gate: Gate::majority(3).unwrap(), epsilon: eps, p_negate: 0.1 },
            width,
            depth,
            n: 2,
            scheme: InputScheme::Balanced,
            architecture: arch,
            seed: 23,
        }
    }

    #[test]
    fn lazy_and_dense_agree_in_law() {
        let r = 20_000;
        for arch in [Architecture::LayerDependent, Architecture::Recurrent] {
            for cfg in [dnn(40, 3, arch, 0.5, InputScheme::Biased { c: 1.0 }), circuit(40, 3, arch, 0.05)] {
                let a = estimate_function_distribution(&cfg, r, NodePolicy::OneNode, Backend::Lazy).unwrap();
                let b = estimate_function_distribution(&cfg, r, NodePolicy::OneNode, Backend::Dense).unwrap();
                let tv = tv_distance(&a.distribution, &b.distribution).unwrap();
                assert!(tv < 0.03, "{arch:?} {}: {tv}", cfg.is_dnn());
            }
        }
    }

    #[test]
    fn all_nodes_lazy_and_dense_agree_in_law() {
        let cfg = dnn(20, 2, Architecture::Recurrent, 0.3, InputScheme::Biased { c: 1.0 });
        let a = estimate_function_distribution(&cfg, 1000, NodePolicy::AllNodes, Backend::Lazy).unwrap();
        let b = estimate_function_distribution(&cfg, 1000, NodePolicy::AllNodes, Backend::Dense).unwrap();
        assert!(a.correlated);
        assert_eq!(a.samples(), 20_000);
        assert!(tv_distance(&a.distribution, &b.distribution).unwrap() < 0.05);
    }

    #[test]
    fn deterministic_given_seed() {
        for cfg in [dnn(30, 3, Architecture::Recurrent, 0.2, InputScheme::Biased { c: 1.0 }), circuit(30, 4, Architecture::LayerDependent, 0.1)] {
            let a = estimate_function_distribution(&cfg, 700, NodePolicy::OneNode, Backend::Lazy).unwrap();
            let b = estimate_function_distribution(&cfg, 700, NodePolicy::OneNode, Backend::Lazy).unwrap();
            assert_eq!(a, b);
            let c = estimate_function_distribution(&cfg.with_seed(1), 700, NodePolicy::OneNode, Backend::Lazy).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = circuit(50, 4, Architecture::Recurrent, 0.05);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| estimate_function_distribution(&cfg, 2000, NodePolicy::OneNode, Backend::Lazy).unwrap());
        let b = three.install(|| estimate_function_distribution(&cfg, 2000, NodePolicy::OneNode, Backend::Lazy).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn odd_support_without_bias() {
        for arch in [Architecture::LayerDependent, Architecture::Recurrent] {
            let cfg = dnn(100, 5, arch, 0.0, InputScheme::Raw);
            let e = estimate_function_distribution(&cfg, 1000, NodePolicy::AllNodes, Backend::Lazy).unwrap();
            assert_eq!(e.samples(), 100_000);
            assert!(support_is_odd(&e.distribution));
        }
    }

    #[test]
    fn half_noise_circuit_is_uniform() {
        let r = 16_000;
        let u = limit_distribution(LimitKind::SignAllUniform, 2).unwrap();
        for depth in [1, 3] {
            let e = estimate_function_distribution(&circuit(30, depth, Architecture::Recurrent, 0.5), r, NodePolicy::OneNode, Backend::Lazy).unwrap();
            // expected TV of a 16-cell uniform sample at R = 16000 is about 0.01
            assert!(tv_distance(&e.distribution, &u).unwrap() < 0.025);
        }
    }

    #[test]
    fn dnn_close_to_theory() {
        let cfg = dnn(300, 3, Architecture::LayerDependent, 0.5, InputScheme::Biased { c: 1.0 });
        let theory = theory_distribution(&cfg, 400_000, 1).unwrap();
        let e = estimate_function_distribution(&cfg, 20_000, NodePolicy::OneNode, Backend::Lazy).unwrap();
        let kl = kl_divergence_smoothed(&e.distribution, &theory, DEFAULT_SMOOTHING).unwrap();
        assert!(kl.nats < 0.01, "{kl:?}");
    }

    #[test]
    fn width_sweep_csv() {
        let cfg = dnn(10, 2, Architecture::LayerDependent, 0.5, InputScheme::Biased { c: 1.0 });
        let theory = theory_distribution(&cfg, 100_000, 1).unwrap();
        let rows = width_sweep(&cfg, &[10, 100], 2000, NodePolicy::OneNode, Backend::Lazy, &theory).unwrap();
        let mut buf = Vec::new();
        write_width_sweep_csv(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("N,kl_to_theory,tv_to_theory,realizations,seed\n10,"));
        assert_eq!(s.lines().count(), 3);
    }
}
