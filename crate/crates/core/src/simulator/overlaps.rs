use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnsembleConfig, NodePolicy};
use super::lazy_dnn::{self, DnnScratch};
use crate::meanfield::Activation;
use crate::rng::substream;
use crate::schema;
use crate::{Error, Result};

/// `q̂^{l,l'}_{γγ'}` averaged over realizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMeasurement {
    pub l: usize,
    pub l_prime: usize,
    /// 0-based pattern indices.
    pub gamma: usize,
    pub gamma_prime: usize,
    pub mean: f64,
    /// Standard deviation of the per-realization value.
    pub std_dev: f64,
    /// `std_dev / √R`.
    pub stderr: f64,
}

const CHUNK: u64 = 16;

/// Site-averaged spin products `(1/N) Σ_i S^l_{iγ} S^{l'}_{iγ'}` over all
/// `l ≤ l'` (and `γ ≤ γ'` when `l = l'`), with their spread across `R`
/// realizations. Sign networks only, since cross-layer products of ReLU
/// activations are not spin overlaps.
pub fn measure_overlaps(cfg: &EnsembleConfig, realizations: u64) -> Result<Vec<OverlapMeasurement>> {
    cfg.validate()?;
    let k = cfg.kernel()?;
    if k.activation() != Activation::Sign {
        return Err(Error::Unsupported("spin overlaps need the sign activation".into()));
    }
    if realizations < 10 {
        return Err(Error::invalid(format!("overlap measurement needs at least 10 realizations, got {realizations}")));
    }
    let (depth, m, w) = (cfg.depth, cfg.num_patterns(), cfg.width as f64);
    let mut index = Vec::new();
    for l in 0..=depth {
        for lp in l..=depth {
            for g in 0..m {
                for h in 0..m {
                    if l < lp || g <= h {
                        index.push((l, lp, g, h));
                    }
                }
            }
        }
    }
    let chunks = realizations.div_ceil(CHUNK);
    let sums: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map_init(DnnScratch::default, |scratch, c| {
            let mut s1 = vec![0.0; index.len()];
            let mut s2 = vec![0.0; index.len()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(realizations) {
                let mut rng = substream(cfg.seed, r);
                let layers = lazy_dnn::run(cfg, &k, &mut rng, NodePolicy::AllNodes, true, scratch).layers.unwrap();
                for (t, &(l, lp, g, h)) in index.iter().enumerate() {
                    let q = layers[l][g].iter().zip(&layers[lp][h]).map(|(a, b)| a * b).sum::<f64>() / w;
                    s1[t] += q;
                    s2[t] += q * q;
                }
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = vec![0.0; index.len()];
    let mut s2 = vec![0.0; index.len()];
    for (a, b) in sums {
        s1.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
    let r = realizations as f64;
    Ok(index
        .iter()
        .enumerate()
        .map(|(t, &(l, lp, g, h))| {
            let mean = s1[t] / r;
            let var = ((s2[t] - r * mean * mean) / (r - 1.0)).max(0.0);
            let sd = var.sqrt();
            OverlapMeasurement { l, l_prime: lp, gamma: g, gamma_prime: h, mean, std_dev: sd, stderr: sd / r.sqrt() }
        })
        .collect())
}

/// Rows `(l, l_prime, gamma, gamma_prime, q_hat, stderr)`, patterns 1-based.
pub fn write_overlap_measurement_csv<W: Write>(out: W, rows: &[OverlapMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::OVERLAP_MEASUREMENT)?;
    for o in rows {
        w.write_record([
            o.l.to_string(),
            o.l_prime.to_string(),
            (o.gamma + 1).to_string(),
            (o.gamma_prime + 1).to_string(),
            o.mean.to_string(),
            o.stderr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
