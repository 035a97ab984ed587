use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::distribution::{DistributionKind, FunctionDistribution};
use crate::gaussian::{bivariate_orthant, factor_psd, fold_samples, Covariance, FactorPolicy};
use crate::logic::{BooleanFunction, MAX_ENUMERATION_ARITY, MAX_FUNCTION_ARITY};
use crate::meanfield::{find_fixed_point, KernelSpec};
use crate::{Error, Result};

/// How to turn an output-field covariance into a function distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnnMethod {
    MonteCarlo { samples: u64, seed: u64 },
    /// Closed form through the bivariate orthant probability; `n = 1` only.
    ExactBivariate,
}

fn arity_of(cov: &Covariance) -> Result<usize> {
    let m = cov.dim();
    if !m.is_power_of_two() || m < 2 {
        return Err(Error::invalid(format!("covariance dimension {m} is not 2^n with n >= 1")));
    }
    let n = m.trailing_zeros() as usize;
    if n > MAX_FUNCTION_ARITY {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_FUNCTION_ARITY });
    }
    Ok(n)
}

/// Distribution of the function `f_γ = sgn(h_γ)`, `h ~ N(0, C)`.
///
/// Bit `γ` is set iff `h_γ < 0`; a tie `h_γ = 0` reads as spin +1.
pub fn dnn_function_distribution(cov: &Covariance, method: DnnMethod) -> Result<FunctionDistribution> {
    let n = arity_of(cov)?;
    match method {
        DnnMethod::ExactBivariate => {
            if n != 1 {
                return Err(Error::invalid(format!("exact bivariate method needs n = 1, got n = {n}")));
            }
            let (a, b, c) = (cov.get(0, 0), cov.get(1, 1), cov.get(0, 1));
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::invalid("exact bivariate method needs positive variances"));
            }
            let rho = c / (a * b).sqrt();
            if rho.abs() > 1.0 + 1e-9 {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: f64::NAN, max_eigenvalue: f64::NAN });
            }
            let same = bivariate_orthant(rho.clamp(-1.0, 1.0))?;
            let diff = 0.5 - same;
            let f = |bits| BooleanFunction::new(1, bits).unwrap();
            // bits: pattern 0 is s = +1, pattern 1 is s = -1
            FunctionDistribution::from_probabilities(1, [(f(0b00), same), (f(0b11), same), (f(0b10), diff), (f(0b01), diff)])
        }
        DnnMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("sample count must be positive"));
            }
            let factor = factor_psd(cov, FactorPolicy::default())?;
            let m = cov.dim();
            let code = |h: &[f64]| h.iter().enumerate().fold(0u64, |acc, (g, &x)| acc | (((x < 0.0) as u64) << g));
            let counts: Vec<(u64, u64)> = if m <= 16 {
                let blocks = fold_samples(&factor, samples, seed, || vec![0u64; 1 << m], |acc, h| acc[code(h) as usize] += 1);
                let mut total = vec![0u64; 1 << m];
                for b in blocks {
                    for (t, c) in total.iter_mut().zip(b) {
                        *t += c;
                    }
                }
                total.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(b, c)| (b as u64, c)).collect()
            } else {
                let blocks = fold_samples(&factor, samples, seed, HashMap::<u64, u64>::new, |acc, h| *acc.entry(code(h)).or_insert(0) += 1);
                let mut total: HashMap<u64, u64> = HashMap::new();
                for b in blocks {
                    for (k, c) in b {
                        *total.entry(k).or_insert(0) += c;
                    }
                }
                total.into_iter().collect()
            };
            FunctionDistribution::from_counts(n, counts.into_iter().map(|(b, c)| (BooleanFunction::new(n, b).unwrap(), c)), seed)
        }
    }
}

/// Analytic large-depth limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    /// ReLU: the two constant functions, 1/2 each.
    ReluConstant,
    /// Sign with raw inputs: uniform over odd functions.
    SignOddUniform,
    /// Sign with a bias input: uniform over all functions.
    SignAllUniform,
}

pub fn limit_distribution(kind: LimitKind, n: usize) -> Result<FunctionDistribution> {
    match kind {
        LimitKind::ReluConstant => FunctionDistribution::uniform_over(n, [BooleanFunction::constant(n, 1)?, BooleanFunction::constant(n, -1)?]),
        LimitKind::SignOddUniform => FunctionDistribution::uniform_over(n, BooleanFunction::enumerate(n)?.filter(|f| f.is_odd())),
        LimitKind::SignAllUniform => {
            if n == 0 || n > MAX_ENUMERATION_ARITY {
                return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_ENUMERATION_ARITY });
            }
            FunctionDistribution::uniform_over(n, BooleanFunction::enumerate(n)?)
        }
    }
    .map(|d| d.with_kind(DistributionKind::Exact))
}

/// Output covariance at the kernel's fixed point: every off-diagonal overlap
/// equal to `q*`, i.e. `c = σ_w²[(1 − q*) I + q* J] + σ_b² J`.
pub fn fixed_point_covariance(k: &KernelSpec, n: usize) -> Result<(f64, Covariance)> {
    if n == 0 || n > MAX_FUNCTION_ARITY {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_FUNCTION_ARITY });
    }
    let q = find_fixed_point(k)?.q_star;
    let (w2, b2) = (k.sigma_w().powi(2), k.sigma_b().powi(2));
    let m = 1usize << n;
    let cov = Covariance::from_fn(m, |i, j| if i == j { w2 + b2 } else { w2 * q + b2 })?;
    Ok((q, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{entropy, tv_distance, EntropyEstimator};
    use nalgebra::DMatrix;

    fn f(n: usize, b: u64) -> BooleanFunction {
        BooleanFunction::new(n, b).unwrap()
    }

    fn corr(rho: f64) -> Covariance {
        Covariance::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
    }

    #[test]
    fn exact_bivariate_examples() {
        let d = dnn_function_distribution(&corr(0.0), DnnMethod::ExactBivariate).unwrap();
        for b in 0..4 {
            assert!((d.prob(&f(1, b)) - 0.25).abs() < 1e-15);
        }
        let d = dnn_function_distribution(&corr(0.5), DnnMethod::ExactBivariate).unwrap();
        assert!((d.prob(&f(1, 0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(&f(1, 3)) - 1.0 / 3.0).abs() < 1e-15);
        // identity: f(+1) = +1, f(-1) = -1 sets bit 1
        assert!((d.prob(&f(1, 2)) - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.prob(&f(1, 1)) - 1.0 / 6.0).abs() < 1e-15);
        let d = dnn_function_distribution(&corr(-1.0), DnnMethod::ExactBivariate).unwrap();
        assert_eq!(d.support_size(), 2);
        assert!(super::super::support_is_odd(&d));
    }

    #[test]
    fn monte_carlo_matches_exact_n1() {
        for rho in [-0.9, 0.0, 0.5, 0.9] {
            let exact = dnn_function_distribution(&corr(rho), DnnMethod::ExactBivariate).unwrap();
            let mc = dnn_function_distribution(&corr(rho), DnnMethod::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
            assert!(tv_distance(&exact, &mc).unwrap() < 0.006);
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let c = Covariance::from_fn(4, |i, j| if i == j { 1.0 } else { 0.2 }).unwrap();
        let a = dnn_function_distribution(&c, DnnMethod::MonteCarlo { samples: 50_000, seed: 8 }).unwrap();
        let b = dnn_function_distribution(&c, DnnMethod::MonteCarlo { samples: 50_000, seed: 8 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kind(), DistributionKind::MonteCarlo { samples: 50_000, seed: 8 });
    }

    #[test]
    fn sparse_path_for_large_arity() {
        let c = Covariance::from_fn(32, |i, j| if i == j { 1.0 } else { 0.9 }).unwrap();
        let d = dnn_function_distribution(&c, DnnMethod::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        assert_eq!(d.arity(), 5);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let c = Covariance::from_fn(3, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        assert!(dnn_function_distribution(&c, DnnMethod::MonteCarlo { samples: 10, seed: 1 }).is_err());
        let c = Covariance::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        assert!(dnn_function_distribution(&c, DnnMethod::ExactBivariate).is_err());
        let bad = Covariance::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(dnn_function_distribution(&bad, DnnMethod::MonteCarlo { samples: 10, seed: 1 }).is_err());
    }

    #[test]
    fn limits() {
        let d = limit_distribution(LimitKind::ReluConstant, 2).unwrap();
        assert_eq!(d.prob(&f(2, 0)), 0.5);
        assert_eq!(d.prob(&f(2, 15)), 0.5);
        let d = limit_distribution(LimitKind::SignOddUniform, 2).unwrap();
        assert_eq!(d.support_size(), 4);
        let d = limit_distribution(LimitKind::SignAllUniform, 2).unwrap();
        assert_eq!(d.support_size(), 16);
        assert!((entropy(&d, EntropyEstimator::PlugIn) - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!(limit_distribution(LimitKind::SignAllUniform, 4).is_err());
    }

    #[test]
    fn symmetric_under_negation_without_bias() {
        let c = Covariance::from_fn(4, |i, j| if i == j { 1.0 } else { 0.3 * (i as f64 - j as f64).abs() / 3.0 }).unwrap();
        let d = dnn_function_distribution(&c, DnnMethod::MonteCarlo { samples: 400_000, seed: 21 }).unwrap();
        let neg = d.negated();
        for (g, p) in d.iter() {
            let q = neg.prob(g);
            let se = (p * (1.0 - p) / 400_000.0).sqrt() * 2f64.sqrt();
            assert!((p - q).abs() < 5.0 * se + 1e-6, "{g}: {p} vs {q}");
        }
    }

    #[test]
    fn fixed_point_covariance_shape() {
        let (q, c) = fixed_point_covariance(&KernelSpec::sign(1.0, 0.5).unwrap(), 2).unwrap();
        assert!(q > 0.0);
        assert!((c.get(0, 0) - 1.25).abs() < 1e-15);
        assert!((c.get(0, 3) - (q + 0.25)).abs() < 1e-15);
    }
}
