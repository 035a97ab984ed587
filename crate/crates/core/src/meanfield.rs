//! Mean-field overlap recursions for infinitely wide random networks.
//!
//! Overlaps `q_{γγ'}` are normalized site averages of spin products between
//! the responses to two input patterns. Their layer-to-layer map is the
//! kernel of the activation under a bivariate Gaussian field.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gaussian::Covariance;
use crate::logic::{InputScheme, MAX_PATTERN_ARITY};
use crate::schema;
use crate::{Error, Result};

/// Tolerance for overlaps slightly outside `[-1, 1]`.
pub const OVERLAP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sign,
    Relu,
}

impl Activation {
    /// `sign` maps 0 to +1.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Sign => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Activation::Relu => x.max(0.0),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sign => "sign",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sign" => Ok(Activation::Sign),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Parse(format!("unknown activation '{other}' (sign, relu)"))),
        }
    }
}

/// Activation plus weight and bias standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw")]
pub struct KernelSpec {
    activation: Activation,
    sigma_w: f64,
    sigma_b: f64,
}

#[derive(Deserialize)]
struct KernelSpecRaw {
    activation: Activation,
    sigma_w: f64,
    sigma_b: f64,
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelSpecRaw) -> Result<Self> {
        KernelSpec::new(r.activation, r.sigma_w, r.sigma_b)
    }
}

impl KernelSpec {
    pub fn new(activation: Activation, sigma_w: f64, sigma_b: f64) -> Result<Self> {
        if !(sigma_w.is_finite() && sigma_w > 0.0) {
            return Err(Error::invalid(format!("sigma_w must be positive, got {sigma_w}")));
        }
        if !(sigma_b.is_finite() && sigma_b >= 0.0) {
            return Err(Error::invalid(format!("sigma_b must be nonnegative, got {sigma_b}")));
        }
        if activation == Activation::Relu && (sigma_w * sigma_w + sigma_b * sigma_b - 2.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "relu needs sigma_w^2 + sigma_b^2 = 2, got {}",
                sigma_w * sigma_w + sigma_b * sigma_b
            )));
        }
        Ok(KernelSpec { activation, sigma_w, sigma_b })
    }

    pub fn sign(sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(Activation::Sign, sigma_w, sigma_b)
    }

    /// ReLU with `σ_w = √(2 − σ_b²)`.
    pub fn relu(sigma_b: f64) -> Result<Self> {
        if !(sigma_b.is_finite() && sigma_b >= 0.0 && sigma_b * sigma_b < 2.0) {
            return Err(Error::invalid(format!("relu needs 0 <= sigma_b < sqrt(2), got {sigma_b}")));
        }
        Self::new(Activation::Relu, (2.0 - sigma_b * sigma_b).sqrt(), sigma_b)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }

    /// `σ_w² + σ_b²`, the preactivation variance when `q_{γγ} = 1`.
    pub fn total_variance(&self) -> f64 {
        self.sigma_w * self.sigma_w + self.sigma_b * self.sigma_b
    }

    /// The scalar map `q → q'`.
    pub fn map(&self, q: f64) -> Result<f64> {
        if !(q.abs() <= 1.0 + OVERLAP_TOLERANCE) {
            return Err(Error::OverlapOutOfDomain(q));
        }
        Ok(self.map_clamped(q))
    }

    pub(crate) fn map_clamped(&self, q: f64) -> f64 {
        let q = q.clamp(-1.0, 1.0);
        let (w2, b2) = (self.sigma_w * self.sigma_w, self.sigma_b * self.sigma_b);
        let out = match self.activation {
            Activation::Sign => 2.0 / PI * ((w2 * q + b2) / (w2 + b2)).clamp(-1.0, 1.0).asin(),
            Activation::Relu => {
                let u = ((w2 * q + b2) / 2.0).clamp(-1.0, 1.0);
                ((1.0 - u * u).sqrt() + u * (0.5 * PI + u.asin())) / PI
            }
        };
        out.clamp(-1.0, 1.0)
    }

    /// `E[φ(h)]` for `h ~ N(0, variance)`.
    pub fn mean_activation(&self, variance: f64) -> f64 {
        match self.activation {
            Activation::Sign => {
                if variance > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Activation::Relu => variance.max(0.0).sqrt() / (2.0 * PI).sqrt(),
        }
    }

    /// `E[φ(h1) φ(h2)]` for a centred Gaussian pair with variances `a`, `b`
    /// and covariance `c`.
    pub fn pair_expectation(&self, a: f64, b: f64, c: f64) -> f64 {
        let ab = a * b;
        if ab <= 0.0 {
            // at least one field is identically zero
            return self.mean_activation(a) * self.mean_activation(b);
        }
        let s = ab.sqrt();
        let rho = (c / s).clamp(-1.0, 1.0);
        match self.activation {
            Activation::Sign => 2.0 / PI * rho.asin(),
            Activation::Relu => s / (2.0 * PI) * ((1.0 - rho * rho).sqrt() + rho * (0.5 * PI + rho.asin())),
        }
    }
}

/// `kernel_map(k, q)`; see [`KernelSpec::map`].
pub fn kernel_map(k: &KernelSpec, q: f64) -> Result<f64> {
    k.map(q)
}

/// Dense symmetric `M × M` overlap matrix over patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl OverlapMatrix {
    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn num_patterns(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, g: usize, h: usize) -> f64 {
        self.entries[(g, h)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    fn map(&self, k: &KernelSpec) -> OverlapMatrix {
        OverlapMatrix { n: self.n, entries: self.entries.map(|q| k.map_clamped(q)) }
    }
}

/// Largest arity for dense overlap matrices (`M² ≤ 2^24` entries).
pub const MAX_OVERLAP_ARITY: usize = 12;

fn check_overlap_arity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_OVERLAP_ARITY.min(MAX_PATTERN_ARITY) {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_OVERLAP_ARITY });
    }
    Ok(())
}

/// Layer-0 overlaps `q⁰` of the scheme.
pub fn initial_overlaps(scheme: &InputScheme, n: usize) -> Result<OverlapMatrix> {
    check_overlap_arity(n)?;
    scheme.validate()?;
    let by_distance: Vec<f64> = (0..=n).map(|d| scheme.initial_overlap_at_distance(n, d)).collect();
    let m = 1usize << n;
    let entries = DMatrix::from_fn(m, m, |g, h| by_distance[(g ^ h).count_ones() as usize]);
    Ok(OverlapMatrix { n, entries })
}

/// Layer-dependent recursion: overlaps at layers `0..depth` (exclusive).
pub fn propagate_overlaps(k: &KernelSpec, scheme: &InputScheme, n: usize, depth: usize) -> Result<Vec<OverlapMatrix>> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    let mut out = Vec::with_capacity(depth);
    out.push(initial_overlaps(scheme, n)?);
    for l in 1..depth {
        let next = out[l - 1].map(k);
        out.push(next);
    }
    Ok(out)
}

/// Output-layer field covariance `c^L = σ_w² q^{L-1} + σ_b² J`.
pub fn covariance_at_layer(k: &KernelSpec, scheme: &InputScheme, n: usize, depth: usize) -> Result<Covariance> {
    let q = propagate_overlaps(k, scheme, n, depth)?.pop().expect("depth >= 1");
    let (w2, b2) = (k.sigma_w * k.sigma_w, k.sigma_b * k.sigma_b);
    Covariance::new(q.entries.map(|x| w2 * x + b2))
}

/// Cross-layer overlaps `q^{l,l'}_{γγ'}` of the recurrent (weight-shared) network.
#[derive(Clone, Debug)]
pub struct CrossLayerOverlaps {
    n: usize,
    depth: usize,
    /// one `(L+1)²` row-major block per pattern pair `γ ≤ γ'`
    pairs: Vec<Vec<f64>>,
}

impl CrossLayerOverlaps {
    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn block(&self, g: usize, h: usize) -> &[f64] {
        &self.pairs[pair_slot(1 << self.n, g, h)]
    }

    /// `q^{l,l'}_{γγ'}` for `0 ≤ l, l' ≤ L`.
    pub fn get(&self, l: usize, lp: usize, g: usize, h: usize) -> f64 {
        let w = self.depth + 1;
        if g <= h {
            self.block(g, h)[l * w + lp]
        } else {
            self.block(h, g)[lp * w + l]
        }
    }

    /// The equal-layer slice `q^{l,l}` as an overlap matrix.
    pub fn equal_layer(&self, l: usize) -> OverlapMatrix {
        let m = 1usize << self.n;
        OverlapMatrix { n: self.n, entries: DMatrix::from_fn(m, m, |g, h| self.get(l, l, g, h)) }
    }
}

fn pair_slot(m: usize, g: usize, h: usize) -> usize {
    debug_assert!(g <= h);
    // row g of the upper triangle starts after m + (m-1) + ... + (m-g+1) entries
    g * m - g * g.saturating_sub(1) / 2 + (h - g)
}

/// Cross-layer recursion for the recurrent architecture, layers `0..=depth`.
pub fn propagate_cross_layer(k: &KernelSpec, scheme: &InputScheme, n: usize, depth: usize) -> Result<CrossLayerOverlaps> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    let q0 = initial_overlaps(scheme, n)?;
    let m = 1usize << n;
    let w = depth + 1;
    let (w2, b2) = (k.sigma_w * k.sigma_w, k.sigma_b * k.sigma_b);
    let means: Vec<f64> = (0..m).map(|g| scheme.mean_input(n, g)).collect();
    let npairs = m * (m + 1) / 2;
    let mut pairs = vec![vec![0.0; w * w]; npairs];
    for g in 0..m {
        for h in g..m {
            pairs[pair_slot(m, g, h)][0] = q0.get(g, h);
        }
    }
    for s in 1..=depth {
        // entries with max(l, l') = s depend only on entries with max = s - 1
        for g in 0..m {
            for h in g..m {
                let slot = pair_slot(m, g, h);
                let self_g = |p: &Vec<Vec<f64>>, l: usize| p[pair_slot(m, g, g)][l * w + l];
                let self_h = |p: &Vec<Vec<f64>>, l: usize| p[pair_slot(m, h, h)][l * w + l];
                let mut cells: Vec<(usize, usize)> = (0..s).flat_map(|o| [(s, o), (o, s)]).collect();
                cells.push((s, s));
                let mut updates = Vec::with_capacity(cells.len());
                for (l, lp) in cells {
                    let v = if lp == 0 {
                        let var = w2 * self_g(&pairs, l - 1) + b2;
                        means[h] * k.mean_activation(var)
                    } else if l == 0 {
                        let var = w2 * self_h(&pairs, lp - 1) + b2;
                        means[g] * k.mean_activation(var)
                    } else {
                        let a = w2 * self_g(&pairs, l - 1) + b2;
                        let b = w2 * self_h(&pairs, lp - 1) + b2;
                        let c = w2 * pairs[slot][(l - 1) * w + (lp - 1)] + b2;
                        k.pair_expectation(a, b, c).clamp(-1.0, 1.0)
                    };
                    updates.push((l * w + lp, v));
                }
                for (idx, v) in updates {
                    pairs[slot][idx] = v;
                }
            }
        }
    }
    Ok(CrossLayerOverlaps { n, depth, pairs })
}

/// A fixed point of the scalar kernel map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub q_star: f64,
    pub stable: bool,
    /// Finite-difference slope of the map at `q_star` (one-sided at ±1).
    pub derivative: f64,
    pub residual: f64,
}

const FD_STEP: f64 = 1e-6;
const SCAN_POINTS: usize = 2001;

fn slope(k: &KernelSpec, q: f64) -> f64 {
    let h = FD_STEP;
    if q + h > 1.0 {
        (k.map_clamped(q) - k.map_clamped(q - h)) / h
    } else if q - h < -1.0 {
        (k.map_clamped(q + h) - k.map_clamped(q)) / h
    } else {
        (k.map_clamped(q + h) - k.map_clamped(q - h)) / (2.0 * h)
    }
}

fn bisect(k: &KernelSpec, mut lo: f64, mut hi: f64) -> Result<f64> {
    let g = |q: f64| k.map_clamped(q) - q;
    let mut glo = g(lo);
    for _ in 0..10_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    // closest endpoint
    let (a, b) = (g(lo).abs(), g(hi).abs());
    let q = if a <= b { lo } else { hi };
    if g(q).abs() >= 1e-12 {
        return Err(Error::NoConvergence(format!("bisection stalled at q = {q} with residual {}", g(q))));
    }
    Ok(q)
}

/// All fixed points of the kernel map on `[-1, 1]`, ascending.
pub fn fixed_points(k: &KernelSpec) -> Result<Vec<FixedPoint>> {
    let g = |q: f64| k.map_clamped(q) - q;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| -1.0 + 2.0 * i as f64 / (SCAN_POINTS - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&q| g(q)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..SCAN_POINTS {
        if vals[i].abs() < 1e-13 {
            roots.push(grid[i]);
        } else if i + 1 < SCAN_POINTS && vals[i + 1].abs() >= 1e-13 && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            roots.push(bisect(k, grid[i], grid[i + 1])?);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(roots
        .into_iter()
        .map(|q| {
            let d = slope(k, q);
            FixedPoint { q_star: q, stable: d.abs() < 1.0, derivative: d, residual: g(q).abs() }
        })
        .collect())
}

/// The stable interior fixed point if there is one, else a stable boundary
/// fixed point, else the first fixed point found.
pub fn find_fixed_point(k: &KernelSpec) -> Result<FixedPoint> {
    let all = fixed_points(k)?;
    let interior = |p: &&FixedPoint| p.q_star.abs() < 1.0;
    all.iter()
        .find(|p| p.stable && interior(p))
        .or_else(|| all.iter().find(|p| p.stable))
        .or_else(|| all.first())
        .copied()
        .ok_or_else(|| Error::NoConvergence("no fixed point found on [-1, 1]".into()))
}

/// One Hamming-distance class of the layer-`L−1` overlap values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub hamming_distance: usize,
    pub overlap: f64,
    /// `binom(n, d) / 2^n`
    pub frequency: f64,
}

fn binomial_frequency(n: usize, d: usize) -> f64 {
    // binom(n, d) / 2^n as a running product to avoid overflow
    let d = d.min(n - d);
    let mut v = 0.5f64.powi((n - d) as i32);
    for i in 0..d {
        v *= (n - i) as f64 / ((d - i) as f64 * 2.0);
    }
    v
}

/// Distinct values of `q^{L−1}` over pattern pairs of a `Raw` input, with
/// their frequencies. `n` may be large since nothing is enumerated.
pub fn overlap_value_spectrum(k: &KernelSpec, scheme: &InputScheme, n: usize, depth: usize) -> Result<Vec<SpectrumEntry>> {
    if *scheme != InputScheme::Raw {
        return Err(Error::Unsupported(format!("overlap spectrum is defined for raw inputs, got {scheme}")));
    }
    if n == 0 {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: usize::MAX });
    }
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    Ok((0..=n)
        .map(|d| {
            let mut q = 1.0 - 2.0 * d as f64 / n as f64;
            for _ in 1..depth {
                q = k.map_clamped(q);
            }
            SpectrumEntry { hamming_distance: d, overlap: q, frequency: binomial_frequency(n, d) }
        })
        .collect())
}

/// Overlap trajectory CSV: one row per layer and pattern pair, 1-based patterns.
pub fn write_overlap_csv<W: Write>(out: W, layers: &[OverlapMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::OVERLAP_TRAJECTORY)?;
    for (l, q) in layers.iter().enumerate() {
        let m = q.num_patterns();
        for g in 0..m {
            for h in 0..m {
                w.write_record([l.to_string(), (g + 1).to_string(), (h + 1).to_string(), q.get(g, h).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Fixed-point scan CSV.
pub fn write_fixed_point_csv<W: Write>(out: W, rows: &[(f64, FixedPoint)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::FIXED_POINT_SCAN)?;
    for (sb, fp) in rows {
        w.write_record([sb.to_string(), fp.q_star.to_string(), fp.stable.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Kernel-map scan CSV: `(q, q_next)` on a uniform grid of `points` values.
pub fn write_kernel_scan_csv<W: Write>(out: W, k: &KernelSpec, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::invalid("kernel scan needs at least 2 points"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::KERNEL_SCAN)?;
    for i in 0..points {
        let q = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        w.write_record([q.to_string(), k.map(q)?.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
