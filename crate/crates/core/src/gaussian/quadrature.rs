//! Gaussian quadrature rules and expectation oracles.
//!
//! Nodes start from Golub–Welsch eigenvalues and are polished with Newton
//! steps on the three-term recurrence; weights come from the derivative.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

fn jacobi_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn newton(mut x: f64, eval: impl Fn(f64) -> (f64, f64)) -> f64 {
    for _ in 0..100 {
        let (p, dp) = eval(x);
        let dx = p / dp;
        x -= dx;
        if dx.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Gauss–Hermite rule for `∫ e^{-x²} f(x) dx`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=200).contains(&order) {
            return Err(Error::invalid(format!("quadrature order {order} outside 1..=200")));
        }
        let off: Vec<f64> = (1..order).map(|i| (i as f64 / 2.0).sqrt()).collect();
        let guess = jacobi_eigenvalues(&vec![0.0; order], &off);
        // orthonormal Hermite recurrence
        let eval = |x: f64| {
            let mut p0 = PI.powf(-0.25);
            let mut p1 = 0.0;
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = x * (2.0 / (j as f64 + 1.0)).sqrt() * p1 - (j as f64 / (j as f64 + 1.0)).sqrt() * p2;
            }
            (p0, (2.0 * order as f64).sqrt() * p1)
        };
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for g in guess {
            let x = newton(g, eval);
            let (_, dp) = eval(x);
            nodes.push(x);
            weights.push(2.0 / (dp * dp));
        }
        Ok(GaussHermite { nodes, weights })
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=200).contains(&order) {
            return Err(Error::invalid(format!("quadrature order {order} outside 1..=200")));
        }
        let off: Vec<f64> = (1..order).map(|i| i as f64 / ((4 * i * i - 1) as f64).sqrt()).collect();
        let guess = jacobi_eigenvalues(&vec![0.0; order], &off);
        let eval = |x: f64| {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            (p0, order as f64 * (x * p0 - p1) / (x * x - 1.0))
        };
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for g in guess {
            let x = newton(g, eval);
            let (_, dp) = eval(x);
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Ok(GaussLegendre { nodes, weights })
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }
}

/// Generalized Gauss–Laguerre rule for `∫_0^∞ x^α e^{-x} f(x) dx`, `α ∈ {0, 1/2}`.
#[derive(Clone, Debug)]
pub struct GaussLaguerre {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLaguerre {
    pub fn new(order: usize) -> Result<Self> {
        Self::build(order, 0.0, 1.0)
    }

    /// The `α = 1/2` rule.
    pub fn half(order: usize) -> Result<Self> {
        Self::build(order, 0.5, 0.5 * PI.sqrt())
    }

    fn build(order: usize, alpha: f64, gamma_alpha_plus_one: f64) -> Result<Self> {
        if !(1..=120).contains(&order) {
            return Err(Error::invalid(format!("quadrature order {order} outside 1..=120")));
        }
        let diag: Vec<f64> = (0..order).map(|i| 2.0 * i as f64 + 1.0 + alpha).collect();
        let off: Vec<f64> = (1..order).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
        let guess = jacobi_eigenvalues(&diag, &off);
        let n = order as f64;
        let eval = |x: f64| {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                let j = j as f64;
                p0 = ((2.0 * j + 1.0 + alpha - x) * p1 - (j + alpha) * p2) / (j + 1.0);
            }
            (p0, (n * p0 - (n + alpha) * p1) / x)
        };
        // Γ(n+α+1)/n!
        let ratio = (1..=order).fold(gamma_alpha_plus_one, |acc, j| acc * (j as f64 + alpha) / j as f64);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for g in guess {
            let x = newton(g, eval);
            let (_, dp) = eval(x);
            nodes.push(x);
            weights.push(ratio / (x * dp * dp));
        }
        Ok(GaussLaguerre { alpha, nodes, weights })
    }
}

/// Gauss rule for the radial Gaussian measure `∫_0^∞ r e^{-r²/2} f(r) dr`.
///
/// Exact for polynomials in `r` of degree `< 2·order`, odd powers included.
/// Recurrence coefficients come from a discretized Stieltjes procedure over a
/// fine composite Gauss–Legendre grid on `[0, 20]`.
#[derive(Clone, Debug)]
pub struct GaussRadial {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRadial {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=40).contains(&order) {
            return Err(Error::invalid(format!("radial quadrature order {order} outside 1..=40")));
        }
        let panel = GaussLegendre::new(24)?;
        let panels = 100;
        let width = 20.0 / panels as f64;
        let mut pts = Vec::with_capacity(panels * 24);
        for k in 0..panels {
            let a = k as f64 * width;
            for (r, w) in panel.on_interval(a, a + width) {
                pts.push((r, w * r * (-0.5 * r * r).exp()));
            }
        }
        let mut alpha = Vec::with_capacity(order);
        let mut beta = Vec::with_capacity(order);
        let mut p_prev = vec![0.0; pts.len()];
        let mut p_cur = vec![1.0; pts.len()];
        let mut norm_prev = 1.0;
        for j in 0..order {
            let norm: f64 = pts.iter().zip(&p_cur).map(|((_, w), p)| w * p * p).sum();
            let a: f64 = pts.iter().zip(&p_cur).map(|((r, w), p)| w * r * p * p).sum::<f64>() / norm;
            let b = if j == 0 { 0.0 } else { norm / norm_prev };
            alpha.push(a);
            beta.push(b);
            let next: Vec<f64> = pts.iter().zip(p_cur.iter().zip(&p_prev)).map(|((r, _), (pc, pp))| (r - a) * pc - b * pp).collect();
            // rescale to keep magnitudes tame; the recurrence is homogeneous
            let scale = norm.sqrt();
            p_prev = p_cur.iter().map(|x| x / scale).collect();
            p_cur = next.iter().map(|x| x / scale).collect();
            norm_prev = 1.0;
        }
        let off: Vec<f64> = beta[1..].iter().map(|b| b.sqrt()).collect();
        let mut j = DMatrix::zeros(order, order);
        for i in 0..order {
            j[(i, i)] = alpha[i];
            if i + 1 < order {
                j[(i, i + 1)] = off[i];
                j[(i + 1, i)] = off[i];
            }
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> =
            (0..order).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GaussRadial { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() })
    }
}

/// Regularity of an integrand, selecting the quadrature scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    /// Analytic integrand: tensor-product Gauss–Hermite.
    Smooth,
    /// Smooth away from the lines `h1 = 0` and `h2 = 0` (sign, ReLU, step):
    /// polar sectors split at those lines, Gauss–Legendre in angle and
    /// a Gauss rule in `r` for the radial weight `r e^{-r²/2}`. Integrands that
    /// are homogeneous in each sector are integrated exactly.
    KinkAtZero,
}

fn lower_2x2(cov: &[[f64; 2]; 2]) -> Result<(f64, f64, f64)> {
    let (a, c, b) = (cov[0][0], cov[0][1], cov[1][1]);
    if (cov[0][1] - cov[1][0]).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
        return Err(Error::invalid("2x2 covariance is not symmetric"));
    }
    if a < 0.0 || b < 0.0 || c * c > a * b * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: f64::NAN, max_eigenvalue: f64::NAN });
    }
    let l11 = a.sqrt();
    let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
    let l22 = (b - l21 * l21).max(0.0).sqrt();
    Ok((l11, l21, l22))
}

/// `E[g(h1, h2)]` for `(h1, h2) ~ N(0, cov)`.
pub fn expectation_2d(g: impl Fn(f64, f64) -> f64, cov: &[[f64; 2]; 2], order: usize, smoothness: Smoothness) -> Result<f64> {
    let (l11, l21, l22) = lower_2x2(cov)?;
    match smoothness {
        Smoothness::Smooth => {
            let gh = GaussHermite::new(order)?;
            let s2 = std::f64::consts::SQRT_2;
            let mut acc = 0.0;
            for (xi, wi) in gh.nodes.iter().zip(&gh.weights) {
                let z1 = s2 * xi;
                let mut inner = 0.0;
                for (xj, wj) in gh.nodes.iter().zip(&gh.weights) {
                    let z2 = s2 * xj;
                    inner += wj * g(l11 * z1, l21 * z1 + l22 * z2);
                }
                acc += wi * inner;
            }
            Ok(acc / PI)
        }
        Smoothness::KinkAtZero => {
            let gl = GaussLegendre::new(order)?;
            let radial_rule = GaussRadial::new(order.min(40))?;
            let two_pi = 2.0 * PI;
            let wrap = |t: f64| t.rem_euclid(two_pi);
            // rays where h1 or h2 vanishes; the set is symmetric under θ → θ + π
            let mut cuts = vec![0.0, 0.5 * PI, PI, 1.5 * PI];
            let t0 = l21.atan2(-l22);
            cuts.push(wrap(t0));
            cuts.push(wrap(t0 + PI));
            cuts.push(two_pi);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            let at = |r: f64, ct: f64, st: f64| {
                let z1 = r * ct;
                let z2 = r * st;
                g(l11 * z1, l21 * z1 + l22 * z2)
            };
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                if w[1] - w[0] <= 0.0 {
                    continue;
                }
                for (theta, wt) in gl.on_interval(w[0], w[1]) {
                    let (ct, st) = (theta.cos(), theta.sin());
                    let mut radial = 0.0;
                    for (r, wr) in radial_rule.nodes.iter().zip(&radial_rule.weights) {
                        radial += wr * at(*r, ct, st);
                    }
                    acc += wt * radial;
                }
            }
            Ok(acc / two_pi)
        }
    }
}

/// `E[f(h1) f(h2)]` for `(h1, h2) ~ N(0, cov)`.
pub fn gauss_hermite_expectation_2d(f: impl Fn(f64) -> f64, cov: &[[f64; 2]; 2], order: usize, smoothness: Smoothness) -> Result<f64> {
    expectation_2d(|a, b| f(a) * f(b), cov, order, smoothness)
}

/// `E[f(h)]` for `h ~ N(0, variance)`.
pub fn expectation_1d(f: impl Fn(f64) -> f64, variance: f64, order: usize, smoothness: Smoothness) -> Result<f64> {
    expectation_2d(|a, _| f(a), &[[variance, 0.0], [0.0, 1.0]], order, smoothness)
}
