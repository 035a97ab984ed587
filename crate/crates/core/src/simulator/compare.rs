use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::config::{Architecture, Backend, EnsembleConfig, NodePolicy};
use super::estimate::{estimate_function_distribution, theory_distribution, EmpiricalDistribution};
use crate::function_space::{kl_divergence_smoothed, tv_distance, FunctionDistribution, SmoothedKl, DEFAULT_SMOOTHING};
use crate::logic::BooleanFunction;
use crate::rng::{derive_seed, substream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub realizations: u64,
    /// Orthant samples for the DNN mean-field distribution.
    pub theory_samples: u64,
    pub bootstrap: usize,
    pub null_draws: usize,
    pub policy: NodePolicy,
    pub backend: Backend,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { realizations: 100_000, theory_samples: 1_000_000, bootstrap: 1000, null_draws: 1000, policy: NodePolicy::OneNode, backend: Backend::Lazy }
    }
}

/// Seeds are derived from the config seed with fixed tags so the two
/// architectures, the theory sample and the resampling are independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSeeds {
    pub layer_dependent: u64,
    pub recurrent: u64,
    pub theory: u64,
    pub bootstrap: u64,
    pub null: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureReport {
    pub config: EnsembleConfig,
    pub options: CompareOptions,
    pub seeds: CompareSeeds,
    pub kl_theory_layer: SmoothedKl,
    pub kl_theory_recurrent: SmoothedKl,
    pub tv_theory_layer: f64,
    pub tv_theory_recurrent: f64,
    pub tv_between: f64,
    /// 95% percentile bootstrap interval of `tv_between`.
    pub bootstrap_ci: [f64; 2],
    /// TV between two independent `R`-sample draws of the theory distribution.
    pub null_mean: f64,
    pub null_interval: [f64; 2],
    /// `tv_between` lies in `null_interval`.
    pub within_null: bool,
    /// `bootstrap_ci` contains `null_mean`.
    pub ci_contains_null_mean: bool,
}

/// Multinomial resample of `count` draws via sequential binomials.
fn multinomial(p: &FunctionDistribution, count: u64, rng: &mut impl Rng) -> Vec<(BooleanFunction, u64)> {
    let mut left = count;
    let mut mass = 1.0;
    let entries: Vec<(&BooleanFunction, &f64)> = p.iter().collect();
    let mut out = Vec::with_capacity(entries.len());
    for (t, (f, &pf)) in entries.iter().enumerate() {
        if left == 0 {
            break;
        }
        let k = if t + 1 == entries.len() || pf >= mass {
            left
        } else {
            Binomial::new(left, (pf / mass).clamp(0.0, 1.0)).unwrap().sample(rng)
        };
        out.push((**f, k));
        left -= k;
        mass -= pf;
    }
    out
}

fn resampled(p: &FunctionDistribution, count: u64, rng: &mut impl Rng) -> Result<FunctionDistribution> {
    FunctionDistribution::from_counts(p.arity(), multinomial(p, count, rng), 0)
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Compare layer-dependent and recurrent ensembles of the same machine.
pub fn compare_architectures(cfg: &EnsembleConfig, opts: &CompareOptions) -> Result<ArchitectureReport> {
    cfg.validate()?;
    if opts.realizations < 1000 {
        return Err(Error::invalid(format!("architecture comparison needs at least 1000 realizations, got {}", opts.realizations)));
    }
    if opts.bootstrap < 10 || opts.null_draws < 10 {
        return Err(Error::invalid("bootstrap and null draw counts must be at least 10"));
    }
    let seeds = compare_seeds(cfg);
    let run = |a: Architecture, seed: u64| -> Result<EmpiricalDistribution> {
        estimate_function_distribution(&cfg.with_architecture(a).with_seed(seed), opts.realizations, opts.policy, opts.backend)
    };
    let ld = run(Architecture::LayerDependent, seeds.layer_dependent)?;
    let rc = run(Architecture::Recurrent, seeds.recurrent)?;
    let theory = theory_distribution(cfg, opts.theory_samples, seeds.theory)?;
    compare_estimates(cfg, opts, &ld, &rc, &theory)
}

/// Seeds `compare_architectures` uses for each of its random components.
pub fn compare_seeds(cfg: &EnsembleConfig) -> CompareSeeds {
    CompareSeeds {
        layer_dependent: derive_seed(cfg.seed, 0),
        recurrent: derive_seed(cfg.seed, 1),
        theory: derive_seed(cfg.seed, 2),
        bootstrap: derive_seed(cfg.seed, 3),
        null: derive_seed(cfg.seed, 4),
    }
}

/// The statistics of `compare_architectures` for estimates that were already
/// computed, e.g. when they are shared with a width sweep. The resampling
/// seeds still come from `compare_seeds(cfg)`.
pub fn compare_estimates(
    cfg: &EnsembleConfig,
    opts: &CompareOptions,
    ld: &EmpiricalDistribution,
    rc: &EmpiricalDistribution,
    theory: &FunctionDistribution,
) -> Result<ArchitectureReport> {
    if opts.bootstrap < 10 || opts.null_draws < 10 {
        return Err(Error::invalid("bootstrap and null draw counts must be at least 10"));
    }
    let seeds = compare_seeds(cfg);
    let (pl, pr) = (&ld.distribution, &rc.distribution);
    let tv_between = tv_distance(pl, pr)?;
    let (sl, sr) = (ld.samples(), rc.samples());

    let mut rng = substream(seeds.bootstrap, 0);
    let mut boot = Vec::with_capacity(opts.bootstrap);
    for _ in 0..opts.bootstrap {
        boot.push(tv_distance(&resampled(pl, sl, &mut rng)?, &resampled(pr, sr, &mut rng)?)?);
    }
    boot.sort_by(f64::total_cmp);
    let bootstrap_ci = [quantile(&boot, 0.025), quantile(&boot, 0.975)];

    let mut rng = substream(seeds.null, 0);
    let mut null = Vec::with_capacity(opts.null_draws);
    for _ in 0..opts.null_draws {
        null.push(tv_distance(&resampled(theory, sl, &mut rng)?, &resampled(theory, sr, &mut rng)?)?);
    }
    null.sort_by(f64::total_cmp);
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    let null_interval = [quantile(&null, 0.025), quantile(&null, 0.975)];

    Ok(ArchitectureReport {
        config: cfg.clone(),
        options: *opts,
        seeds,
        kl_theory_layer: kl_divergence_smoothed(pl, theory, DEFAULT_SMOOTHING)?,
        kl_theory_recurrent: kl_divergence_smoothed(pr, theory, DEFAULT_SMOOTHING)?,
        tv_theory_layer: tv_distance(pl, theory)?,
        tv_theory_recurrent: tv_distance(pr, theory)?,
        tv_between,
        bootstrap_ci,
        null_mean,
        null_interval,
        within_null: null_interval[0] <= tv_between && tv_between <= null_interval[1],
        ci_contains_null_mean: bootstrap_ci[0] <= null_mean && null_mean <= bootstrap_ci[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{limit_distribution, LimitKind};
    use crate::logic::InputScheme;
    use crate::meanfield::Activation;
    use crate::simulator::Machine;

    #[test]
    fn multinomial_preserves_count_and_mean() {
        let u = limit_distribution(LimitKind::SignAllUniform, 2).unwrap();
        let mut rng = substream(1, 1);
        let mut tot = vec![0u64; 16];
        for _ in 0..200 {
            let draw = multinomial(&u, 1000, &mut rng);
            assert_eq!(draw.iter().map(|e| e.1).sum::<u64>(), 1000);
            draw.iter().for_each(|(f, k)| tot[f.code() as usize] += k);
        }
        for t in tot {
            assert!((t as f64 - 12_500.0).abs() < 5.0 * 12_500f64.sqrt());
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.875), 4.5);
    }

    #[test]
    fn small_dnn_report() {
        let cfg = EnsembleConfig {
            machine: Machine::Dnn { activation: Activation::Sign, sigma_w: 1.0, sigma_b: 0.5 },
            width: 100,
            depth: 3,
            n: 2,
            scheme: InputScheme::Biased { c: 1.0 },
            architecture: Architecture::LayerDependent,
            seed: 3,
        };
        let opts = CompareOptions { realizations: 4000, theory_samples: 200_000, bootstrap: 200, null_draws: 200, ..Default::default() };
        let rep = compare_architectures(&cfg, &opts).unwrap();
        assert!(rep.bootstrap_ci[0] <= rep.bootstrap_ci[1]);
        assert!(rep.null_interval[0] < rep.null_mean && rep.null_mean < rep.null_interval[1]);
        assert!(rep.tv_between < 0.1);
        let j = serde_json::to_value(&rep).unwrap();
        for key in ["kl_theory_layer", "kl_theory_recurrent", "tv_between", "bootstrap_ci", "within_null", "seeds"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert!(compare_architectures(&cfg, &CompareOptions { realizations: 10, ..opts }).is_err());

        let seeds = compare_seeds(&cfg);
        let run = |a, s| estimate_function_distribution(&cfg.with_architecture(a).with_seed(s), 4000, NodePolicy::OneNode, Backend::Lazy).unwrap();
        let ld = run(Architecture::LayerDependent, seeds.layer_dependent);
        let rc = run(Architecture::Recurrent, seeds.recurrent);
        let theory = theory_distribution(&cfg, 200_000, seeds.theory).unwrap();
        assert_eq!(compare_estimates(&cfg, &opts, &ld, &rc, &theory).unwrap(), rep);
    }
}
