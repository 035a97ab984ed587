use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::factor::Factor;
use crate::rng::substream;

/// Samples per independent random stream.
pub const SAMPLE_BLOCK: u64 = 1 << 14;

/// Draw `count` samples `h = L z` and fold them block by block.
///
/// Block `b` uses stream `b` of `seed`, so the per-block accumulators, returned
/// in block order, do not depend on the thread count.
pub fn fold_samples<T, I, F>(factor: &Factor, count: u64, seed: u64, init: I, fold: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, &[f64]) + Sync,
{
    let d = factor.dim();
    let l = factor.lower();
    // row-major copy of the lower triangle
    let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..=i).map(|j| l[(i, j)]).collect()).collect();
    let blocks = count.div_ceil(SAMPLE_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let n = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
            let mut acc = init();
            let mut z = vec![0.0; d];
            let mut h = vec![0.0; d];
            for _ in 0..n {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for (hi, row) in h.iter_mut().zip(&rows) {
                    *hi = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                }
                fold(&mut acc, &h);
            }
            acc
        })
        .collect()
}

/// `count` samples from `N(0, L Lᵀ)`, one per row.
pub fn sample_gaussian(factor: &Factor, count: usize, seed: u64) -> DMatrix<f64> {
    let d = factor.dim();
    let blocks = fold_samples(factor, count as u64, seed, Vec::new, |acc: &mut Vec<f64>, h| acc.extend_from_slice(h));
    let flat: Vec<f64> = blocks.into_iter().flatten().collect();
    DMatrix::from_row_slice(count, d, &flat)
}
