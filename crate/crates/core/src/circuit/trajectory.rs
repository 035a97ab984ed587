use std::io::Write;

use super::{evolve_exact, evolve_noisy, initial_function_distribution, CircuitEnsembleSpec};
use crate::function_space::{entropy, EntropyEstimator, EntropyPoint, FunctionDistribution};
use crate::schema;
use crate::Result;

/// Layers `0..=depth` of the exact recursion, starting from the scheme's
/// layer-0 distribution. Noisy specs go through [`evolve_noisy`] with the
/// given prune floor.
pub fn evolve_trajectory(spec: &CircuitEnsembleSpec, depth: usize, prune: f64) -> Result<Vec<FunctionDistribution>> {
    spec.validate()?;
    let mut out = vec![initial_function_distribution(&spec.scheme, spec.n)?];
    for _ in 0..depth {
        let last = out.last().unwrap();
        let next = if spec.epsilon == 0.0 { evolve_exact(last, spec)? } else { evolve_noisy(last, spec, prune)?.distribution };
        out.push(next);
    }
    Ok(out)
}

/// Entropy of each layer of an exact trajectory; `samples` and `seed` are 0.
pub fn circuit_entropy_curve(trajectory: &[FunctionDistribution]) -> Vec<EntropyPoint> {
    trajectory
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let h = entropy(d, EntropyEstimator::PlugIn);
            EntropyPoint { depth: l, entropy_nats: h, entropy_normalized: h / (1usize << d.arity()) as f64, samples: 0, seed: 0 }
        })
        .collect()
}

/// Rows `(layer, f_hex, p)`.
pub fn write_distribution_trajectory_csv<W: Write>(out: W, trajectory: &[FunctionDistribution]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::DISTRIBUTION_TRAJECTORY)?;
    for (l, d) in trajectory.iter().enumerate() {
        for (f, p) in d.iter() {
            w.write_record([l.to_string(), format!("{:#x}", f.code()), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `{"layers": [{"layer", "n", "kind", "entries"}, …]}`.
pub fn trajectory_to_json(trajectory: &[FunctionDistribution]) -> serde_json::Value {
    let layers: Vec<serde_json::Value> = trajectory
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let mut v = d.to_json();
            v["layer"] = l.into();
            v
        })
        .collect();
    serde_json::json!({ "layers": layers })
}
