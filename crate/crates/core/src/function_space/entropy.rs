use std::io::Write;

use serde::{Deserialize, Serialize};

use super::distribution::{DistributionKind, FunctionDistribution};
use super::dnn::{dnn_function_distribution, fixed_point_covariance, DnnMethod};
use crate::logic::InputScheme;
use crate::meanfield::{covariance_at_layer, KernelSpec};
use crate::schema;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyEstimator {
    #[default]
    PlugIn,
    /// Plug-in plus `(K̂ − 1)/(2S)`; only differs for sampled distributions.
    MillerMadow,
}

/// Entropy in nats.
pub fn entropy(d: &FunctionDistribution, estimator: EntropyEstimator) -> f64 {
    let h: f64 = d.iter().map(|(_, &p)| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum();
    // rounding in a near point mass can leave -0 or a tiny negative sum
    let h = h.max(0.0) + 0.0;
    match (estimator, d.kind()) {
        (EntropyEstimator::MillerMadow, DistributionKind::MonteCarlo { samples, .. }) if samples > 0 => {
            h + (d.support_size() as f64 - 1.0) / (2.0 * samples as f64)
        }
        _ => h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub depth: usize,
    pub entropy_nats: f64,
    /// `entropy_nats / 2^n`
    pub entropy_normalized: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Output-function entropy for depths `1..=l_max`.
///
/// Every depth reuses the same seed, so the curves use common random
/// numbers and depth-to-depth differences are not swamped by sampling noise.
pub fn entropy_curve(
    k: &KernelSpec,
    scheme: &InputScheme,
    n: usize,
    l_max: usize,
    samples: u64,
    seed: u64,
    estimator: EntropyEstimator,
) -> Result<Vec<EntropyPoint>> {
    if l_max < 1 {
        return Err(Error::invalid("l_max must be at least 1"));
    }
    let norm = (1usize << n) as f64;
    (1..=l_max)
        .map(|l| {
            let cov = covariance_at_layer(k, scheme, n, l)?;
            let d = dnn_function_distribution(&cov, DnnMethod::MonteCarlo { samples, seed })?;
            let h = entropy(&d, estimator);
            Ok(EntropyPoint { depth: l, entropy_nats: h, entropy_normalized: h / norm, samples, seed })
        })
        .collect()
}

pub fn write_entropy_curve_csv<W: Write>(out: W, points: &[EntropyPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::ENTROPY_CURVE)?;
    for p in points {
        w.write_record([p.depth.to_string(), p.entropy_nats.to_string(), p.entropy_normalized.to_string(), p.samples.to_string(), p.seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Entropy of the large-depth sign network at the fixed point of its kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaBPoint {
    pub sigma_b: f64,
    pub q_star: f64,
    pub entropy_nats: f64,
    pub entropy_normalized: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Sign activation, `L → ∞`: the covariance has every off-diagonal overlap at
/// `q*(σ_b)`. All points share `seed`.
pub fn entropy_vs_sigma_b(
    sigma_w: f64,
    sigma_bs: &[f64],
    n: usize,
    samples: u64,
    seed: u64,
    estimator: EntropyEstimator,
) -> Result<Vec<SigmaBPoint>> {
    let norm = (1usize << n) as f64;
    sigma_bs
        .iter()
        .map(|&sb| {
            let (q_star, cov) = fixed_point_covariance(&KernelSpec::sign(sigma_w, sb)?, n)?;
            let d = dnn_function_distribution(&cov, DnnMethod::MonteCarlo { samples, seed })?;
            let h = entropy(&d, estimator);
            Ok(SigmaBPoint { sigma_b: sb, q_star, entropy_nats: h, entropy_normalized: h / norm, samples, seed })
        })
        .collect()
}

pub fn write_entropy_vs_sigma_b_csv<W: Write>(out: W, points: &[SigmaBPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::ENTROPY_VS_SIGMA_B)?;
    for p in points {
        w.write_record([
            p.sigma_b.to_string(),
            p.q_star.to_string(),
            p.entropy_nats.to_string(),
            p.entropy_normalized.to_string(),
            p.samples.to_string(),
            p.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
