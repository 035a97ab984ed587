use serde::{Deserialize, Serialize};

use super::distribution::FunctionDistribution;
use crate::logic::BooleanFunction;
use crate::{Error, Result};

/// Weight of the uniform component in the smoothed KL variant.
pub const DEFAULT_SMOOTHING: f64 = 1e-9;

fn same_arity(p: &FunctionDistribution, q: &FunctionDistribution) -> Result<()> {
    if p.arity() != q.arity() {
        return Err(Error::ArityMismatch { expected: p.arity(), found: q.arity() });
    }
    Ok(())
}

/// `Σ P log(P/Q)` in nats; requires `support(P) ⊆ support(Q)`.
pub fn kl_divergence(p: &FunctionDistribution, q: &FunctionDistribution) -> Result<f64> {
    same_arity(p, q)?;
    let mut kl = 0.0;
    for (f, &pf) in p.iter() {
        let qf = q.prob(f);
        if qf <= 0.0 {
            return Err(Error::SupportViolation(format!("{f} has P = {pf} but Q = 0")));
        }
        kl += pf * (pf / qf).ln();
    }
    Ok(kl.max(0.0))
}

/// KL divergence against `Q` mixed with the uniform distribution over all
/// `2^(2^n)` functions at `weight`, with the number of support violations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedKl {
    pub nats: f64,
    pub smoothing_weight: f64,
    pub support_violations: usize,
}

pub fn kl_divergence_smoothed(p: &FunctionDistribution, q: &FunctionDistribution, weight: f64) -> Result<SmoothedKl> {
    same_arity(p, q)?;
    if !(weight > 0.0 && weight < 1.0) {
        return Err(Error::invalid(format!("smoothing weight {weight} outside (0, 1)")));
    }
    let uniform = 1.0 / BooleanFunction::count(p.arity());
    let mut kl = 0.0;
    let mut violations = 0;
    for (f, &pf) in p.iter() {
        let raw = q.prob(f);
        if raw <= 0.0 {
            violations += 1;
        }
        let qf = (1.0 - weight) * raw + weight * uniform;
        kl += pf * (pf / qf).ln();
    }
    Ok(SmoothedKl { nats: kl.max(0.0), smoothing_weight: weight, support_violations: violations })
}

/// `(1/2) Σ |P − Q|`.
pub fn tv_distance(p: &FunctionDistribution, q: &FunctionDistribution) -> Result<f64> {
    same_arity(p, q)?;
    let mut s = 0.0;
    for (f, &pf) in p.iter() {
        s += (pf - q.prob(f)).abs();
    }
    for (f, &qf) in q.iter() {
        if p.prob(f) == 0.0 {
            s += qf;
        }
    }
    Ok((0.5 * s).min(1.0))
}

/// Every function in the support is odd.
pub fn support_is_odd(d: &FunctionDistribution) -> bool {
    d.support().all(|f| f.is_odd())
}
