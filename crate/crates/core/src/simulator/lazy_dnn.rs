use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Architecture, EnsembleConfig, NodePolicy};
use super::realization::spins_to_code;
use crate::meanfield::{Activation, KernelSpec};
use crate::rng::Rng as StreamRng;

/// A residual below this fraction of the probe norm counts as in-span.
const SPAN_TOLERANCE: f64 = 1e-9;

/// Orthonormal basis of the probe vectors seen so far, with the Gaussian
/// coordinates `w_i · q_j` of every weight row on it.
///
/// For i.i.d. `N(0, σ²)` rows and orthonormal `q_j` these coordinates are
/// i.i.d. `N(0, σ²)`, so drawing them on demand gives exactly the law of
/// `W v` for every `v` in the span.
#[derive(Default)]
struct ProbeBasis {
    width: usize,
    /// Basis vectors back to back, `width` entries each.
    q: Vec<f64>,
    /// `z[j][i] = w_i · q_j` for the rows drawn so far.
    z: Vec<Vec<f64>>,
}

impl ProbeBasis {
    fn reset(&mut self, width: usize) {
        self.width = width;
        self.q.clear();
        self.z.clear();
    }

    fn rank(&self) -> usize {
        self.z.len()
    }

    /// Coefficients of `v` on the basis, extending it if `v` leaves the span.
    /// New coordinates are drawn for `rows` rows.
    fn project(&mut self, v: &[f64], rows: usize, sigma_w: f64, rng: &mut StreamRng, coeffs: &mut Vec<f64>) {
        let w = self.width;
        let norm0 = dot(v, v).sqrt();
        coeffs.clear();
        coeffs.resize(self.rank(), 0.0);
        if norm0 == 0.0 {
            return;
        }
        let mut resid = v.to_vec();
        // Gram–Schmidt, repeated when cancellation was severe ("twice is enough")
        let mut before = norm0;
        let mut norm;
        let mut pass = 0;
        loop {
            for (j, c) in coeffs.iter_mut().enumerate() {
                let qj = &self.q[j * w..(j + 1) * w];
                let d = dot(qj, &resid);
                *c += d;
                resid.iter_mut().zip(qj).for_each(|(r, q)| *r -= d * q);
            }
            norm = dot(&resid, &resid).sqrt();
            pass += 1;
            if pass == 2 || norm > 0.5 * before {
                break;
            }
            before = norm;
        }
        if norm > SPAN_TOLERANCE * norm0 {
            self.q.extend(resid.iter().map(|r| r / norm));
            self.z.push((0..rows).map(|_| sigma_w * rng.sample::<f64, _>(StandardNormal)).collect());
            coeffs.push(norm);
        }
    }
}

/// Dot product with independent partial sums so it vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for t in 0..8 {
            acc[t] += x[t] * y[t];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Reusable buffers for [`run`].
#[derive(Default)]
pub(crate) struct DnnScratch {
    basis: ProbeBasis,
    bias: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

/// Output of one lazily sampled DNN realization.
pub(crate) struct DnnRun {
    /// Layer-`L` function codes of the requested nodes.
    pub codes: Vec<u64>,
    /// Columns (one per pattern) of every layer when requested.
    pub layers: Option<Vec<Vec<Vec<f64>>>>,
}

/// Sample one realization and propagate all patterns.
pub(crate) fn run(
    cfg: &EnsembleConfig,
    kernel: &KernelSpec,
    rng: &mut StreamRng,
    policy: NodePolicy,
    keep_layers: bool,
    scratch: &mut DnnScratch,
) -> DnnRun {
    let (w, n, depth) = (cfg.width, cfg.n, cfg.depth);
    let m = cfg.num_patterns();
    let recurrent = cfg.architecture == Architecture::Recurrent;
    let scale = 1.0 / (w as f64).sqrt();
    let (sw, sb) = (kernel.sigma_w(), kernel.sigma_b());

    let idx: Vec<usize> = {
        let comps = cfg.scheme.len(n);
        (0..w).map(|_| rng.random_range(0..comps)).collect()
    };
    let mut cols: Vec<Vec<f64>> = (0..m).map(|g| idx.iter().map(|&c| cfg.scheme.component(n, c, g)).collect()).collect();
    let mut kept = keep_layers.then(|| vec![cols.clone()]);

    let DnnScratch { basis, bias, coeffs } = scratch;
    basis.reset(w);
    coeffs.resize_with(m, Vec::new);
    for l in 1..=depth {
        let last = l == depth;
        let rows = if last && policy == NodePolicy::OneNode && !keep_layers { 1 } else { w };
        if !recurrent {
            basis.reset(w);
        }
        if !recurrent || l == 1 {
            let bias_rows = if recurrent { if depth == 1 { rows } else { w } } else { rows };
            bias.clear();
            bias.extend((0..bias_rows).map(|_| sb * rng.sample::<f64, _>(StandardNormal)));
        }
        for (g, col) in cols.iter().enumerate() {
            basis.project(col, rows, sw, rng, &mut coeffs[g]);
        }
        let act = if last { Activation::Sign } else { kernel.activation() };
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(m);
        for c in coeffs.iter() {
            let mut h = vec![0.0; rows];
            for (j, &cj) in c.iter().enumerate() {
                if cj != 0.0 {
                    let zj = &basis.z[j][..rows];
                    h.iter_mut().zip(zj).for_each(|(hi, z)| *hi += cj * z);
                }
            }
            for (hi, bi) in h.iter_mut().zip(bias.iter()) {
                *hi = act.apply(*hi * scale + bi);
            }
            next.push(h);
        }
        cols = next;
        if let Some(k) = kept.as_mut() {
            k.push(cols.clone());
        }
    }
    let out_rows = match policy {
        NodePolicy::OneNode => 1,
        NodePolicy::AllNodes => w,
    };
    let codes = (0..out_rows).map(|i| spins_to_code(cols.iter().map(|c| c[i]))).collect();
    DnnRun { codes, layers: kept }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn basis_stays_orthonormal_and_reproduces_probes() {
        let mut rng = substream(1, 2);
        let mut b = ProbeBasis::default();
        b.reset(50);
        let mut c = Vec::new();
        let probes: Vec<Vec<f64>> =
            (0..8).map(|t| (0..50).map(|i| if (i * (t + 3)) % 7 < 3 { 1.0 } else { -1.0 }).collect()).collect();
        for p in &probes {
            b.project(p, 50, 1.0, &mut rng, &mut c);
            // v = Σ c_j q_j
            for i in 0..50 {
                let v: f64 = c.iter().enumerate().map(|(j, cj)| cj * b.q[j * 50 + i]).sum();
                assert!((v - p[i]).abs() < 1e-12);
            }
        }
        let r = b.rank();
        for a in 0..r {
            for d in 0..r {
                let x = dot(&b.q[a * 50..(a + 1) * 50], &b.q[d * 50..(d + 1) * 50]);
                assert!((x - if a == d { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
        // a repeated or negated probe does not grow the basis
        let before = b.rank();
        let neg: Vec<f64> = probes[0].iter().map(|x| -x).collect();
        b.project(&neg, 50, 1.0, &mut rng, &mut c);
        assert_eq!(b.rank(), before);
    }
}
