use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use super::CircuitEnsembleSpec;
use crate::function_space::FunctionDistribution;
use crate::gaussian::SAMPLE_BLOCK;
use crate::logic::BooleanFunction;
use crate::rng::substream;
use crate::{Error, Result};

/// Upper bound on `support^k` for the tuple sum.
pub const EXACT_WORK_BUDGET: f64 = 1e8;

/// Leading tuple indices handled per parallel task. Fixed, so the merge
/// order and hence every rounding does not depend on the thread count.
const TASK_CHUNK: usize = 8;

/// Arity up to which accumulators are dense arrays over all `2^(2^n)` functions.
const DENSE_ARITY: usize = 4;

enum Acc {
    Dense(Vec<f64>),
    Sparse(HashMap<u64, f64>),
}

impl Acc {
    fn new(n: usize) -> Self {
        if n <= DENSE_ARITY {
            Acc::Dense(vec![0.0; 1usize << (1usize << n)])
        } else {
            Acc::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn add(&mut self, code: u64, w: f64) {
        match self {
            Acc::Dense(v) => v[code as usize] += w,
            Acc::Sparse(m) => *m.entry(code).or_insert(0.0) += w,
        }
    }

    fn merge(&mut self, other: Acc) {
        match (self, other) {
            (Acc::Dense(a), Acc::Dense(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Acc::Sparse(a), Acc::Sparse(b)) => b.into_iter().for_each(|(k, v)| *a.entry(k).or_insert(0.0) += v),
            _ => unreachable!("accumulators of one step share a layout"),
        }
    }

    fn entries(self) -> Vec<(u64, f64)> {
        match self {
            Acc::Dense(v) => v.into_iter().enumerate().filter(|e| e.1 > 0.0).map(|(c, w)| (c as u64, w)).collect(),
            Acc::Sparse(m) => {
                let mut e: Vec<(u64, f64)> = m.into_iter().filter(|e| e.1 > 0.0).collect();
                e.sort_unstable_by_key(|e| e.0);
                e
            }
        }
    }
}

/// Noiseless step including quenched negation, as unnormalized weights.
fn deterministic_step(p: &FunctionDistribution, spec: &CircuitEnsembleSpec) -> Result<Acc> {
    spec.validate()?;
    if p.arity() != spec.n {
        return Err(Error::ArityMismatch { expected: spec.n, found: p.arity() });
    }
    let k = spec.fan_in();
    let support: Vec<(u64, f64)> = p.iter().map(|(f, &w)| (f.code(), w)).collect();
    let s = support.len();
    let work = (s as f64).powi(k as i32);
    if work > EXACT_WORK_BUDGET {
        return Err(Error::BudgetExceeded { needed: work, budget: EXACT_WORK_BUDGET });
    }
    let n = spec.n;
    let mask = BooleanFunction::mask(n);
    let (keep, flip) = (1.0 - spec.p_negate, spec.p_negate);
    let plan = spec.gate.plan();
    let chunks: Vec<Acc> = (0..s)
        .collect::<Vec<_>>()
        .par_chunks(TASK_CHUNK)
        .map(|firsts| {
            let mut acc = Acc::new(n);
            let mut idx = vec![0usize; k];
            let mut words = vec![0u64; k];
            for &first in firsts {
                idx.iter_mut().for_each(|i| *i = 0);
                idx[0] = first;
                loop {
                    let mut w = 1.0;
                    for (j, &i) in idx.iter().enumerate() {
                        words[j] = support[i].0;
                        w *= support[i].1;
                    }
                    let g = plan.apply(&words) & mask;
                    if keep > 0.0 {
                        acc.add(g, keep * w);
                    }
                    if flip > 0.0 {
                        acc.add(!g & mask, flip * w);
                    }
                    // odometer over positions 1..k
                    let mut j = k;
                    loop {
                        j -= 1;
                        if j == 0 {
                            break;
                        }
                        idx[j] += 1;
                        if idx[j] < s {
                            break;
                        }
                        idx[j] = 0;
                    }
                    if j == 0 {
                        break;
                    }
                }
            }
            acc
        })
        .collect();
    let mut it = chunks.into_iter();
    let mut total = it.next().unwrap_or_else(|| Acc::new(n));
    for c in it {
        total.merge(c);
    }
    Ok(total)
}

fn to_distribution(n: usize, entries: Vec<(u64, f64)>) -> Result<FunctionDistribution> {
    FunctionDistribution::from_weights(n, entries.into_iter().map(|(c, w)| (BooleanFunction::from_bits_unchecked(n, c), w)))
}

/// One layer of the noiseless recursion:
/// `P'(f) = Σ_{f_1..f_k} Π P(f_j) ⟨δ[f, ξ α(f_1, …, f_k)]⟩_ξ`.
///
/// Fails with [`Error::BudgetExceeded`] when `support^k` exceeds
/// [`EXACT_WORK_BUDGET`]; use [`evolve_sampled`] then.
pub fn evolve_exact(p: &FunctionDistribution, spec: &CircuitEnsembleSpec) -> Result<FunctionDistribution> {
    if spec.epsilon != 0.0 {
        return Err(Error::invalid(format!("exact evolution is noiseless; use evolve_noisy for epsilon = {}", spec.epsilon)));
    }
    to_distribution(spec.n, deterministic_step(p, spec)?.entries())
}

/// Result of a noisy step: the distribution after pruning and the mass pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyStep {
    pub distribution: FunctionDistribution,
    pub pruned_mass: f64,
}

/// In-place unnormalized Walsh–Hadamard transform.
fn fwht(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// One layer with annealed noise: each output bit of `ξ α(…)` flips
/// independently with probability `ε`. Entries below `prune` are dropped and
/// the rest renormalized.
///
/// The channel is applied densely over all `2^(2^n)` functions, so `n ≤ 4`.
/// With `ε = 0` the result equals [`evolve_exact`] bit for bit.
pub fn evolve_noisy(p: &FunctionDistribution, spec: &CircuitEnsembleSpec, prune: f64) -> Result<NoisyStep> {
    if !(prune >= 0.0 && prune < 1.0) {
        return Err(Error::invalid(format!("prune floor {prune} outside [0, 1)")));
    }
    let n = spec.n;
    let acc = deterministic_step(p, spec)?;
    let entries = if spec.epsilon == 0.0 {
        acc.entries()
    } else {
        if n > DENSE_ARITY {
            return Err(Error::BudgetExceeded { needed: 2f64.powi(1 << n), budget: 2f64.powi(1 << DENSE_ARITY) });
        }
        let m = 1usize << n;
        let size = 1usize << m;
        let mut dense = match acc {
            Acc::Dense(v) => v,
            Acc::Sparse(_) => unreachable!(),
        };
        let eps = spec.epsilon;
        if n <= 3 {
            // direct product-Bernoulli sum; all terms positive
            let src: Vec<(usize, f64)> = dense.iter().enumerate().filter(|e| *e.1 > 0.0).map(|(c, &w)| (c, w)).collect();
            let pw: Vec<f64> = (0..=m).map(|d| eps.powi(d as i32) * (1.0 - eps).powi((m - d) as i32)).collect();
            dense = (0..size)
                .into_par_iter()
                .map(|f| src.iter().map(|&(g, w)| w * pw[(f ^ g).count_ones() as usize]).sum())
                .collect();
        } else {
            // the channel is diagonal in the Walsh basis with eigenvalue (1 − 2ε)^|S|
            fwht(&mut dense);
            let lam = 1.0 - 2.0 * eps;
            for (s, v) in dense.iter_mut().enumerate() {
                *v *= lam.powi(s.count_ones() as i32) / size as f64;
            }
            fwht(&mut dense);
        }
        dense.into_iter().enumerate().map(|(c, w)| (c as u64, w.max(0.0))).filter(|e| e.1 > 0.0).collect()
    };
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let (kept, dropped): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.1 / total >= prune);
    let pruned_mass = dropped.iter().map(|e| e.1).sum::<f64>() / total;
    Ok(NoisyStep { distribution: to_distribution(n, kept)?, pruned_mass })
}

/// Population-dynamics step on a pool of functions.
///
/// Each new member composes `k` parents drawn uniformly with replacement,
/// is negated with probability `p_negate`, then has each pattern bit flipped
/// with probability `epsilon`. Members are generated in fixed blocks with
/// their own random streams, so the output depends only on `seed`.
pub fn evolve_sampled(pool: &[BooleanFunction], spec: &CircuitEnsembleSpec, seed: u64) -> Result<Vec<BooleanFunction>> {
    spec.validate()?;
    if pool.is_empty() {
        return Err(Error::invalid("empty pool"));
    }
    if let Some(f) = pool.iter().find(|f| f.arity() != spec.n) {
        return Err(Error::ArityMismatch { expected: spec.n, found: f.arity() });
    }
    let n = spec.n;
    let k = spec.fan_in();
    let m = 1usize << n;
    let mask = BooleanFunction::mask(n);
    let r = pool.len() as u64;
    let blocks = r.div_ceil(SAMPLE_BLOCK);
    let plan = spec.gate.plan();
    let out: Vec<Vec<BooleanFunction>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let count = SAMPLE_BLOCK.min(r - b * SAMPLE_BLOCK);
            let mut words = vec![0u64; k];
            (0..count)
                .map(|_| {
                    for w in words.iter_mut() {
                        *w = pool[rng.random_range(0..pool.len())].code();
                    }
                    let mut g = plan.apply(&words) & mask;
                    if spec.p_negate > 0.0 && rng.random::<f64>() < spec.p_negate {
                        g = !g & mask;
                    }
                    if spec.epsilon > 0.0 {
                        for gamma in 0..m {
                            if rng.random::<f64>() < spec.epsilon {
                                g ^= 1 << gamma;
                            }
                        }
                    }
                    BooleanFunction::from_bits_unchecked(n, g)
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{initial_function_distribution, magnetization_map};
    use crate::function_space::{entropy, limit_distribution, tv_distance, EntropyEstimator, LimitKind};
    use crate::logic::{Gate, InputScheme};
    use rand::SeedableRng;

    fn spec(g: Gate, n: usize, scheme: InputScheme) -> CircuitEnsembleSpec {
        CircuitEnsembleSpec::new(g, n, scheme).unwrap()
    }

    fn random_distribution(n: usize, rng: &mut impl Rng) -> FunctionDistribution {
        let entries: Vec<(BooleanFunction, f64)> =
            BooleanFunction::enumerate(n).unwrap().map(|f| (f, if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random::<f64>() })).collect();
        let entries = if entries.iter().all(|e| e.1 == 0.0) { vec![(BooleanFunction::new(n, 0).unwrap(), 1.0)] } else { entries };
        FunctionDistribution::from_weights(n, entries).unwrap()
    }

    #[test]
    fn point_masses_fixed_under_idempotent_gates() {
        for g in [Gate::and(), Gate::or(), Gate::majority(3).unwrap()] {
            let s = spec(g, 2, InputScheme::Raw);
            for f in BooleanFunction::enumerate(2).unwrap() {
                let out = evolve_exact(&FunctionDistribution::point_mass(f), &s).unwrap();
                assert_eq!(out, FunctionDistribution::point_mass(f));
            }
        }
    }

    #[test]
    fn uniform_is_stationary_for_balanced_gates() {
        let x_and = Gate::from_fn(3, |s| s[0] * if s[1] == -1 && s[2] == -1 { -1 } else { 1 }).unwrap();
        assert!(x_and.properties().balanced);
        for g in [Gate::majority(3).unwrap(), Gate::xor(2).unwrap(), Gate::xor(3).unwrap(), x_and] {
            let u = limit_distribution(LimitKind::SignAllUniform, 2).unwrap();
            let out = evolve_exact(&u, &spec(g, 2, InputScheme::Raw)).unwrap();
            for (f, p) in out.iter() {
                assert!((p - 1.0 / 16.0).abs() < 1e-15, "{f}");
            }
            assert_eq!(out.support_size(), 16);
        }
    }

    #[test]
    fn marginals_follow_the_magnetization_map() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gates = [Gate::and(), Gate::or(), Gate::majority(3).unwrap(), Gate::xor(2).unwrap()];
        for t in 0..50 {
            let p = random_distribution(2, &mut rng);
            let g = gates[t % gates.len()].clone();
            let out = evolve_exact(&p, &spec(g.clone(), 2, InputScheme::Raw)).unwrap();
            for gamma in 0..4 {
                let want = magnetization_map(&g, p.magnetization(gamma)).unwrap();
                assert!((out.magnetization(gamma) - want).abs() < 1e-12);
            }
            assert!((out.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quenched_negation_mixes_complements() {
        let f = BooleanFunction::new(2, 0b0110).unwrap();
        let s = spec(Gate::and(), 2, InputScheme::Raw).with_noise(0.0, 0.25).unwrap();
        let out = evolve_exact(&FunctionDistribution::point_mass(f), &s).unwrap();
        assert_eq!(out.prob(&f), 0.75);
        assert_eq!(out.prob(&f.negate()), 0.25);
        assert!(evolve_exact(&FunctionDistribution::point_mass(f), &s.with_noise(0.1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let u = limit_distribution(LimitKind::SignAllUniform, 3).unwrap();
        let s = spec(Gate::majority(5).unwrap(), 3, InputScheme::Raw);
        assert!(matches!(evolve_exact(&u, &s), Err(Error::BudgetExceeded { .. })));
        // 256^3 fits
        let s = spec(Gate::majority(3).unwrap(), 3, InputScheme::Raw);
        let out = evolve_exact(&u, &s).unwrap();
        assert_eq!(out.support_size(), 256);
    }

    #[test]
    fn noisy_step_point_mass_n1() {
        // MAJ3 of the identity dictator is itself; the channel then flips
        // each of the two bits with probability ε
        let eps = 0.1;
        let id = BooleanFunction::dictator(1, 0).unwrap();
        let s = spec(Gate::majority(3).unwrap(), 1, InputScheme::Raw).with_noise(eps, 0.0).unwrap();
        let out = evolve_noisy(&FunctionDistribution::point_mass(id), &s, 0.0).unwrap();
        for f in BooleanFunction::enumerate(1).unwrap() {
            let d = f.hamming(&id) as i32;
            let want = eps.powi(d) * (1.0 - eps).powi(2 - d);
            assert!((out.distribution.prob(&f) - want).abs() < 1e-15, "{f}");
        }
        assert_eq!(out.pruned_mass, 0.0);
    }

    #[test]
    fn half_noise_randomizes_in_one_step() {
        for n in [2, 3] {
            let p0 = initial_function_distribution(&InputScheme::Balanced, n).unwrap();
            let s = spec(Gate::and(), n, InputScheme::Balanced).with_noise(0.5, 0.0).unwrap();
            let out = evolve_noisy(&p0, &s, 0.0).unwrap().distribution;
            let u = limit_distribution(LimitKind::SignAllUniform, n).unwrap();
            assert!(tv_distance(&out, &u).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_matches_exact() {
        let p0 = initial_function_distribution(&InputScheme::Balanced, 2).unwrap();
        let s = spec(Gate::majority(3).unwrap(), 2, InputScheme::Balanced).with_noise(0.0, 0.1).unwrap();
        let a = evolve_exact(&p0, &s).unwrap();
        let b = evolve_noisy(&p0, &s, 0.0).unwrap().distribution;
        assert_eq!(a, b);
    }

    #[test]
    fn walsh_channel_agrees_with_direct_sum() {
        // n = 4 goes through the transform; compare one entry by hand
        let eps = 0.2;
        let f = BooleanFunction::dictator(4, 1).unwrap();
        let s = spec(Gate::majority(3).unwrap(), 4, InputScheme::Raw).with_noise(eps, 0.0).unwrap();
        let out = evolve_noisy(&FunctionDistribution::point_mass(f), &s, 0.0).unwrap().distribution;
        for g in [f, f.negate(), BooleanFunction::new(4, 0x1234).unwrap()] {
            let d = g.hamming(&f) as i32;
            let want = eps.powi(d) * (1.0 - eps).powi(16 - d);
            assert!((out.prob(&g) - want).abs() < 1e-15 + 1e-9 * want);
        }
        assert!((out.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pruning_reports_mass() {
        let f = BooleanFunction::dictator(2, 0).unwrap();
        let s = spec(Gate::majority(3).unwrap(), 2, InputScheme::Raw).with_noise(0.01, 0.0).unwrap();
        let out = evolve_noisy(&FunctionDistribution::point_mass(f), &s, 1e-3).unwrap();
        assert_eq!(out.distribution.support_size(), 5);
        let kept = 0.99f64.powi(4) + 4.0 * 0.01 * 0.99f64.powi(3);
        assert!((out.pruned_mass - (1.0 - kept)).abs() < 1e-12);
    }

    fn pool_from(p: &FunctionDistribution, r: usize, seed: u64) -> Vec<BooleanFunction> {
        let mut rng = substream(seed, 1 << 40);
        let cdf: Vec<(BooleanFunction, f64)> = p
            .iter()
            .scan(0.0, |acc, (f, w)| {
                *acc += w;
                Some((*f, *acc))
            })
            .collect();
        (0..r)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * cdf.last().unwrap().1;
                cdf.iter().find(|e| u < e.1).unwrap_or(cdf.last().unwrap()).0
            })
            .collect()
    }

    fn empirical(pool: &[BooleanFunction], n: usize) -> FunctionDistribution {
        let mut c: HashMap<BooleanFunction, u64> = HashMap::new();
        pool.iter().for_each(|f| *c.entry(*f).or_insert(0) += 1);
        FunctionDistribution::from_counts(n, c, 0).unwrap()
    }

    #[test]
    fn sampled_step_tracks_exact_step() {
        let r = 20_000;
        let s = spec(Gate::and(), 2, InputScheme::Balanced).with_noise(0.0, 0.2).unwrap();
        let p0 = initial_function_distribution(&InputScheme::Balanced, 2).unwrap();
        let exact = evolve_exact(&p0, &s).unwrap();
        for seed in 0..10 {
            let pool = pool_from(&p0, r, seed);
            let next = evolve_sampled(&pool, &s, seed).unwrap();
            assert_eq!(next.len(), r);
            let tv = tv_distance(&empirical(&next, 2), &exact).unwrap();
            assert!(tv < 3.0 / (r as f64).sqrt(), "seed {seed}: {tv}");
        }
    }

    #[test]
    fn sampled_identities() {
        let f = BooleanFunction::new(2, 0b1001).unwrap();
        let pool = vec![f; 3000];
        let s = spec(Gate::majority(3).unwrap(), 2, InputScheme::Raw);
        assert_eq!(evolve_sampled(&pool, &s, 4).unwrap(), pool);
        let a = evolve_sampled(&pool, &s.clone().with_noise(0.5, 0.0).unwrap(), 4).unwrap();
        let b = evolve_sampled(&pool, &s.clone().with_noise(0.5, 0.0).unwrap(), 4).unwrap();
        assert_eq!(a, b);
        let u = limit_distribution(LimitKind::SignAllUniform, 2).unwrap();
        // chi-square style bound on 16 cells at R = 3000
        assert!(tv_distance(&empirical(&a, 2), &u).unwrap() < 0.06);
    }

    fn maj3_sampled_entropy_gap(steps: u64, r: usize) -> (f64, f64) {
        let s = spec(Gate::majority(3).unwrap(), 2, InputScheme::Balanced);
        let mut p = initial_function_distribution(&InputScheme::Balanced, 2).unwrap();
        let mut pool = pool_from(&p, r, 0);
        for l in 0..steps {
            p = evolve_exact(&p, &s).unwrap();
            pool = evolve_sampled(&pool, &s, 100 + l).unwrap();
        }
        (entropy(&p, EntropyEstimator::PlugIn), entropy(&empirical(&pool, 2), EntropyEstimator::PlugIn))
    }

    #[test]
    fn sampled_maj3_entropy_tracks_exact_short_horizon() {
        for steps in [1, 3, 6] {
            let (he, hs) = maj3_sampled_entropy_gap(steps, 100_000);
            assert!((he - hs).abs() < 0.05, "L={steps}: {he} vs {hs}");
        }
    }

    /// m = 0 is unstable under MAJ3 with slope 3/2, so pool fluctuations of
    /// order 1/√R grow like 1.5^L and saturate well before 20 steps at
    /// R = 1e5. Kept as a record of the failing target.
    #[test]
    #[ignore = "finite pools drift away from the unstable m = 0 point; fails by design"]
    fn sampled_maj3_entropy_tracks_exact_20_steps() {
        let (he, hs) = maj3_sampled_entropy_gap(20, 100_000);
        assert!((he - hs).abs() < 0.05, "{he} vs {hs}");
    }
}
