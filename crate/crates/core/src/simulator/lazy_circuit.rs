use rand::Rng;

use super::config::{Architecture, EnsembleConfig, NodePolicy};
use super::realization::{distinct_predecessors, input_word, noise_word};
use crate::circuit::CircuitEnsembleSpec;
use crate::logic::BooleanFunction;
use crate::rng::Rng as StreamRng;

/// Reusable per-worker buffers. Membership is tracked with stamps so
/// nothing of size `N` is cleared between realizations.
#[derive(Default)]
pub(crate) struct CircuitScratch {
    stamp: u32,
    /// `seen[l][i] == stamp` iff node `i` of layer `l` is in the light cone.
    seen: Vec<Vec<u32>>,
    pos: Vec<Vec<u32>>,
    nodes: Vec<Vec<u32>>,
    preds: Vec<Vec<u32>>,
    negate: Vec<Vec<bool>>,
    values: Vec<Vec<u64>>,
    /// Recurrent machines draw each node's inputs once.
    cached: Vec<u32>,
    cache_preds: Vec<u32>,
    cache_negate: Vec<bool>,
}

impl CircuitScratch {
    fn prepare(&mut self, width: usize, depth: usize, k: usize) {
        if self.seen.len() != depth + 1 || self.seen.first().map_or(0, |v| v.len()) != width || self.cache_preds.len() != width * k {
            *self = CircuitScratch {
                stamp: 0,
                seen: vec![vec![0; width]; depth + 1],
                pos: vec![vec![0; width]; depth + 1],
                nodes: vec![Vec::new(); depth + 1],
                preds: vec![Vec::new(); depth + 1],
                negate: vec![Vec::new(); depth + 1],
                values: vec![Vec::new(); depth + 1],
                cached: vec![0; width],
                cache_preds: vec![0; width * k],
                cache_negate: vec![false; width],
            };
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|v| v.fill(0));
            self.cached.fill(0);
            self.stamp = 1;
        }
        for l in 0..=depth {
            self.nodes[l].clear();
            self.preds[l].clear();
            self.negate[l].clear();
            self.values[l].clear();
        }
    }
}

/// Sample the part of one circuit realization that the requested layer-`L`
/// nodes depend on and evaluate it for all patterns.
pub(crate) fn run(
    cfg: &EnsembleConfig,
    spec: &CircuitEnsembleSpec,
    rng: &mut StreamRng,
    policy: NodePolicy,
    s: &mut CircuitScratch,
) -> Vec<u64> {
    let (w, n, depth) = (cfg.width, cfg.n, cfg.depth);
    let k = spec.fan_in();
    let m = 1usize << n;
    let mask = BooleanFunction::mask(n);
    let recurrent = cfg.architecture == Architecture::Recurrent;
    s.prepare(w, depth, k);
    let st = s.stamp;

    let outputs: Vec<u32> = match policy {
        NodePolicy::OneNode => vec![0],
        NodePolicy::AllNodes => (0..w as u32).collect(),
    };
    for &i in &outputs {
        s.seen[depth][i as usize] = st;
        s.pos[depth][i as usize] = s.nodes[depth].len() as u32;
        s.nodes[depth].push(i);
    }
    // backward: draw the wiring of every node in the light cone
    let mut buf = vec![0u32; k];
    for l in (1..=depth).rev() {
        let (lower, upper) = s.nodes.split_at_mut(l);
        let (below, here) = (&mut lower[l - 1], &upper[0]);
        for &i in here.iter() {
            let iu = i as usize;
            let neg = if recurrent {
                if s.cached[iu] != st {
                    distinct_predecessors(rng, w, &mut s.cache_preds[iu * k..(iu + 1) * k]);
                    s.cache_negate[iu] = spec.p_negate > 0.0 && rng.random::<f64>() < spec.p_negate;
                    s.cached[iu] = st;
                }
                buf.copy_from_slice(&s.cache_preds[iu * k..(iu + 1) * k]);
                s.cache_negate[iu]
            } else {
                distinct_predecessors(rng, w, &mut buf);
                spec.p_negate > 0.0 && rng.random::<f64>() < spec.p_negate
            };
            s.negate[l].push(neg);
            for &p in &buf {
                s.preds[l].push(p);
                let pu = p as usize;
                if s.seen[l - 1][pu] != st {
                    s.seen[l - 1][pu] = st;
                    s.pos[l - 1][pu] = below.len() as u32;
                    below.push(p);
                }
            }
        }
    }
    // layer 0: one input component per node
    let inputs: Vec<u64> = (0..cfg.scheme.len(n)).map(|c| input_word(&cfg.scheme, n, c)).collect();
    for _ in 0..s.nodes[0].len() {
        s.values[0].push(inputs[rng.random_range(0..inputs.len())]);
    }
    let plan = spec.gate.plan();
    let mut words = vec![0u64; k];
    for l in 1..=depth {
        let (lower, upper) = s.values.split_at_mut(l);
        let (prev, out) = (&lower[l - 1], &mut upper[0]);
        let pos = &s.pos[l - 1];
        for (t, &neg) in s.negate[l].iter().enumerate() {
            for j in 0..k {
                words[j] = prev[pos[s.preds[l][t * k + j] as usize] as usize];
            }
            let mut g = plan.apply(&words) & mask;
            if neg {
                g = !g & mask;
            }
            out.push(g ^ noise_word(rng, m, spec.epsilon));
        }
    }
    s.values[depth].clone()
}
