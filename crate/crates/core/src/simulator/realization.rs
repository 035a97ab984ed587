use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Architecture, EnsembleConfig, Machine};
use crate::logic::{BooleanFunction, Gate, InputScheme};
use crate::meanfield::Activation;
use crate::rng::{substream, Rng as StreamRng};
use crate::Result;

/// Parameters of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    Dnn { weights: DMatrix<f64>, biases: DVector<f64> },
    /// `preds[i*k..(i+1)*k]` are the inputs of node `i`; `negate[i]` is its
    /// quenched output negation.
    Circuit { k: usize, preds: Vec<u32>, negate: Vec<bool> },
}

/// One explicitly sampled machine.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    /// Input component feeding node `i` at layer 0.
    pub input_index: Vec<usize>,
    architecture: Architecture,
    depth: usize,
    /// One entry for recurrent machines, `depth` entries otherwise.
    params: Vec<LayerParams>,
}

impl Realization {
    /// Parameters of layer `l` in `1..=depth`. Recurrent machines return the
    /// same storage for every layer.
    pub fn layer(&self, l: usize) -> &LayerParams {
        assert!((1..=self.depth).contains(&l), "layer {l} outside 1..={}", self.depth);
        match self.architecture {
            Architecture::Recurrent => &self.params[0],
            Architecture::LayerDependent => &self.params[l - 1],
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.input_index.len()
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }
}

/// `k` distinct indices in `0..width`.
pub(crate) fn distinct_predecessors(rng: &mut impl Rng, width: usize, out: &mut [u32]) {
    for j in 0..out.len() {
        loop {
            let c = rng.random_range(0..width) as u32;
            if !out[..j].contains(&c) {
                out[j] = c;
                break;
            }
        }
    }
}

pub(crate) fn draw_circuit_layer(rng: &mut impl Rng, gate: &Gate, width: usize, p_negate: f64) -> LayerParams {
    let k = gate.fan_in();
    let mut preds = vec![0u32; width * k];
    let mut negate = vec![false; width];
    for i in 0..width {
        distinct_predecessors(rng, width, &mut preds[i * k..(i + 1) * k]);
        negate[i] = p_negate > 0.0 && rng.random::<f64>() < p_negate;
    }
    LayerParams::Circuit { k, preds, negate }
}

/// Draw all parameters of a machine from `seed`.
pub fn sample_realization(cfg: &EnsembleConfig, seed: u64) -> Result<Realization> {
    cfg.validate()?;
    let mut rng = substream(seed, 0);
    let w = cfg.width;
    let comps = cfg.scheme.len(cfg.n);
    let input_index: Vec<usize> = (0..w).map(|_| rng.random_range(0..comps)).collect();
    let count = match cfg.architecture {
        Architecture::Recurrent => 1,
        Architecture::LayerDependent => cfg.depth,
    };
    let params = (0..count)
        .map(|_| match &cfg.machine {
            Machine::Dnn { sigma_w, sigma_b, .. } => {
                let nw = Normal::new(0.0, *sigma_w).unwrap();
                let weights = DMatrix::from_fn(w, w, |_, _| nw.sample(&mut rng));
                let biases = DVector::from_fn(w, |_, _| sigma_b * rng.sample::<f64, _>(rand_distr::StandardNormal));
                LayerParams::Dnn { weights, biases }
            }
            Machine::Circuit { gate, p_negate, .. } => draw_circuit_layer(&mut rng, gate, w, *p_negate),
        })
        .collect();
    Ok(Realization { input_index, architecture: cfg.architecture, depth: cfg.depth, params })
}

/// States of every layer for all `M = 2^n` patterns.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerStates {
    /// `N × M` matrices for layers `0..=L`. Hidden layers hold activations;
    /// layer `L` holds the output spins `sgn(H^L)`.
    Dnn(Vec<DMatrix<f64>>),
    /// Packed truth table of every node, layers `0..=L`.
    Circuit { n: usize, words: Vec<Vec<u64>> },
}

impl LayerStates {
    /// Layer-`L` node functions.
    pub fn output_functions(&self, n: usize) -> Vec<BooleanFunction> {
        match self {
            LayerStates::Dnn(layers) => {
                let s = layers.last().unwrap();
                (0..s.nrows()).map(|i| BooleanFunction::from_bits_unchecked(n, spins_to_code(s.row(i).iter().copied()))).collect()
            }
            LayerStates::Circuit { words, .. } => {
                words.last().unwrap().iter().map(|&c| BooleanFunction::from_bits_unchecked(n, c)).collect()
            }
        }
    }
}

/// Bit `γ` set iff the value at pattern `γ` is negative.
pub(crate) fn spins_to_code(values: impl Iterator<Item = f64>) -> u64 {
    values.enumerate().fold(0u64, |acc, (g, x)| acc | (((x < 0.0) as u64) << g))
}

pub(crate) fn input_word(scheme: &InputScheme, n: usize, m: usize) -> u64 {
    spins_to_code((0..1usize << n).map(|g| scheme.component(n, m, g)))
}

/// Propagate all patterns through `r`. Annealed circuit noise is drawn
/// from `noise_seed`, one flip decision per (layer, node, pattern).
pub fn propagate_all_patterns(r: &Realization, cfg: &EnsembleConfig, noise_seed: u64) -> Result<LayerStates> {
    cfg.validate()?;
    let (w, n) = (cfg.width, cfg.n);
    let m = cfg.num_patterns();
    match &cfg.machine {
        Machine::Dnn { activation, .. } => {
            let s0 = DMatrix::from_fn(w, m, |i, g| cfg.scheme.component(n, r.input_index[i], g));
            let mut layers = vec![s0];
            let scale = 1.0 / (w as f64).sqrt();
            for l in 1..=cfg.depth {
                let LayerParams::Dnn { weights, biases } = r.layer(l) else { unreachable!() };
                let mut h = weights * layers.last().unwrap() * scale;
                for mut col in h.column_iter_mut() {
                    col += biases;
                }
                let act = if l == cfg.depth { Activation::Sign } else { *activation };
                h.apply(|x| *x = act.apply(*x));
                layers.push(h);
            }
            Ok(LayerStates::Dnn(layers))
        }
        Machine::Circuit { gate, epsilon, .. } => {
            let mask = BooleanFunction::mask(n);
            let mut noise = substream(noise_seed, 1);
            let mut words = vec![r.input_index.iter().map(|&c| input_word(&cfg.scheme, n, c)).collect::<Vec<u64>>()];
            let mut buf = vec![0u64; gate.fan_in()];
            let plan = gate.plan();
            for l in 1..=cfg.depth {
                let LayerParams::Circuit { k, preds, negate } = r.layer(l) else { unreachable!() };
                let prev = words.last().unwrap();
                let next: Vec<u64> = (0..w)
                    .map(|i| {
                        for j in 0..*k {
                            buf[j] = prev[preds[i * k + j] as usize];
                        }
                        let mut g = plan.apply(&buf) & mask;
                        if negate[i] {
                            g = !g & mask;
                        }
                        g ^ noise_word(&mut noise, m, *epsilon)
                    })
                    .collect();
                words.push(next);
            }
            Ok(LayerStates::Circuit { n, words })
        }
    }
}

/// Flip mask with each of `m` bits set independently with probability `eps`.
#[inline]
pub(crate) fn noise_word(rng: &mut StreamRng, m: usize, eps: f64) -> u64 {
    if eps == 0.0 {
        return 0;
    }
    let mut f = 0u64;
    for g in 0..m {
        if rng.random::<f64>() < eps {
            f |= 1 << g;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{pattern_spin, InputScheme};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn dnn(width: usize, depth: usize, arch: Architecture, act: Activation, sw: f64, sb: f64, scheme: InputScheme) -> EnsembleConfig {
        EnsembleConfig {
            machine: Machine::Dnn { activation: act, sigma_w: sw, sigma_b: sb },
            width,
            depth,
            n: 2,
            scheme,
            architecture: arch,
            seed: 0,
        }
    }

    fn circuit(width: usize, depth: usize, arch: Architecture, gate: Gate, eps: f64, p: f64, scheme: InputScheme) -> EnsembleConfig {
        EnsembleConfig { machine: Machine::Circuit { gate, epsilon: eps, p_negate: p }, width, depth, n: 2, scheme, architecture: arch, seed: 0 }
    }

    #[test]
    fn dnn_matches_scalar_reference() {
        let relu_w = 2f64.sqrt();
        for (act, sw, sb) in [(Activation::Sign, 1.0, 0.5), (Activation::Relu, relu_w, 0.0)] {
            for arch in [Architecture::LayerDependent, Architecture::Recurrent] {
                let cfg = dnn(4, 3, arch, act, sw, sb, InputScheme::Biased { c: 1.0 });
                for seed in 0..20 {
                    let r = sample_realization(&cfg, seed).unwrap();
                    let LayerStates::Dnn(layers) = propagate_all_patterns(&r, &cfg, 0).unwrap() else { panic!() };
                    for g in 0..4 {
                        // per-pattern scalar loop
                        let mut s: Vec<f64> = (0..4).map(|i| cfg.scheme.component(2, r.input_index[i], g)).collect();
                        for l in 1..=3 {
                            let LayerParams::Dnn { weights, biases } = r.layer(l) else { panic!() };
                            let mut next = vec![0.0; 4];
                            for i in 0..4 {
                                let mut h = 0.0;
                                for j in 0..4 {
                                    h += weights[(i, j)] * s[j];
                                }
                                h = h / 2.0 + biases[i];
                                next[i] = if l == 3 { Activation::Sign.apply(h) } else { act.apply(h) };
                            }
                            s = next;
                        }
                        for i in 0..4 {
                            assert_eq!(layers[3][(i, g)], s[i]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn circuit_matches_scalar_reference() {
        for arch in [Architecture::LayerDependent, Architecture::Recurrent] {
            let cfg = circuit(16, 4, arch, Gate::majority(3).unwrap(), 0.0, 0.3, InputScheme::Balanced);
            for seed in 0..100 {
                let r = sample_realization(&cfg, seed).unwrap();
                let states = propagate_all_patterns(&r, &cfg, seed).unwrap();
                let outs = states.output_functions(2);
                let gate = Gate::majority(3).unwrap();
                for g in 0..4 {
                    let mut s: Vec<i8> = (0..16).map(|i| cfg.scheme.component(2, r.input_index[i], g) as i8).collect();
                    for l in 1..=4 {
                        let LayerParams::Circuit { k, preds, negate } = r.layer(l) else { panic!() };
                        s = (0..16)
                            .map(|i| {
                                let ins: Vec<i8> = (0..*k).map(|j| s[preds[i * k + j] as usize]).collect();
                                gate.eval(&ins) * if negate[i] { -1 } else { 1 }
                            })
                            .collect();
                    }
                    for i in 0..16 {
                        assert_eq!(outs[i].spin(g), s[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn recurrent_shares_storage() {
        let cfg = circuit(50, 5, Architecture::Recurrent, Gate::and(), 0.0, 0.0, InputScheme::Raw);
        let r = sample_realization(&cfg, 3).unwrap();
        for l in 2..=5 {
            assert!(std::ptr::eq(r.layer(1), r.layer(l)));
            assert_eq!(r.layer(1), r.layer(l));
        }
        let cfg = cfg.with_architecture(Architecture::LayerDependent);
        let r = sample_realization(&cfg, 3).unwrap();
        assert_ne!(r.layer(1), r.layer(2));
    }

    #[test]
    fn layer_dependent_weights_uncorrelated() {
        let cfg = dnn(10, 2, Architecture::LayerDependent, Activation::Sign, 1.0, 0.0, InputScheme::Raw);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for seed in 0..100 {
            let r = sample_realization(&cfg, seed).unwrap();
            let (LayerParams::Dnn { weights: a, .. }, LayerParams::Dnn { weights: b, .. }) = (r.layer(1), r.layer(2)) else { panic!() };
            for (x, y) in a.iter().zip(b.iter()) {
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
        }
        let corr = sxy / (sxx * syy).sqrt();
        // 10^4 pairs: standard error 0.01
        assert!(corr.abs() < 0.04, "{corr}");
    }

    #[test]
    fn out_degrees_are_poisson() {
        let cfg = circuit(10_000, 1, Architecture::LayerDependent, Gate::majority(3).unwrap(), 0.0, 0.0, InputScheme::Raw);
        let r = sample_realization(&cfg, 11).unwrap();
        let LayerParams::Circuit { preds, .. } = r.layer(1) else { panic!() };
        let mut deg = vec![0usize; 10_000];
        preds.iter().for_each(|&p| deg[p as usize] += 1);
        let bins = 9;
        let mut obs = vec![0f64; bins];
        deg.iter().for_each(|&d| obs[d.min(bins - 1)] += 1.0);
        let lambda = 3.0f64;
        let mut expected = vec![0f64; bins];
        let mut pk = (-lambda).exp();
        for (d, e) in expected.iter_mut().enumerate().take(bins - 1) {
            *e = pk * 10_000.0;
            pk *= lambda / (d + 1) as f64;
        }
        expected[bins - 1] = 10_000.0 - expected[..bins - 1].iter().sum::<f64>();
        let chi2: f64 = obs.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
        let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} vs {crit}");
    }

    #[test]
    fn layer_zero_functions_are_components() {
        let cfg = circuit(40, 2, Architecture::LayerDependent, Gate::and(), 0.0, 0.0, InputScheme::Biased { c: 1.0 });
        let r = sample_realization(&cfg, 1).unwrap();
        let LayerStates::Circuit { words, .. } = propagate_all_patterns(&r, &cfg, 0).unwrap() else { panic!() };
        let comps: Vec<u64> = InputScheme::Biased { c: 1.0 }.component_functions(2).unwrap().iter().map(|f| f.code()).collect();
        for (i, &w) in words[0].iter().enumerate() {
            assert_eq!(w, comps[r.input_index[i]]);
        }
        assert!(comps.contains(&0));
        // dictator 0 is s_1: spin at pattern γ equals pattern_spin(2, γ, 0)
        assert_eq!(BooleanFunction::from_bits_unchecked(2, comps[0]).spin(3), pattern_spin(2, 3, 0));
    }

    #[test]
    fn odd_outputs_without_bias() {
        let cfg = dnn(30, 4, Architecture::Recurrent, Activation::Sign, 1.0, 0.0, InputScheme::Raw);
        for seed in 0..50 {
            let r = sample_realization(&cfg, seed).unwrap();
            assert!(propagate_all_patterns(&r, &cfg, 0).unwrap().output_functions(2).iter().all(|f| f.is_odd()));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = circuit(20, 3, Architecture::LayerDependent, Gate::majority(3).unwrap(), 0.1, 0.2, InputScheme::Balanced);
        let a = propagate_all_patterns(&sample_realization(&cfg, 5).unwrap(), &cfg, 6).unwrap();
        let b = propagate_all_patterns(&sample_realization(&cfg, 5).unwrap(), &cfg, 6).unwrap();
        assert_eq!(a, b);
    }
}
