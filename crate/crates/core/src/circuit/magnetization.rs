use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::logic::{BooleanFunction, Gate, InputScheme, MAX_FUNCTION_ARITY};
use crate::schema;
use crate::{Error, Result};

/// `|1 − |m|| < tol` counts as having reached a ±1 basin.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// `m' = Σ_S Π_j (1 + S_j m)/2 · α(S)`: the output magnetization when all
/// `k` inputs are independent with magnetization `m`.
pub fn magnetization_map(g: &Gate, m: f64) -> Result<f64> {
    if !(m.abs() <= 1.0) {
        return Err(Error::invalid(format!("magnetization {m} outside [-1, 1]")));
    }
    let k = g.fan_in();
    let (up, down) = ((1.0 + m) / 2.0, (1.0 - m) / 2.0);
    let mut out = 0.0;
    for c in 0..1usize << k {
        let minus = c.count_ones() as i32;
        out += up.powi(k as i32 - minus) * down.powi(minus) * g.output(c) as f64;
    }
    Ok(out.clamp(-1.0, 1.0))
}

/// Per-pattern magnetizations `m_γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationState {
    values: Vec<f64>,
}

impl MagnetizationState {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_power_of_two() {
            return Err(Error::invalid(format!("{} magnetizations is not 2^n", values.len())));
        }
        if let Some(m) = values.iter().find(|m| !(m.abs() <= 1.0)) {
            return Err(Error::invalid(format!("magnetization {m} outside [-1, 1]")));
        }
        Ok(MagnetizationState { values })
    }

    /// `m⁰_γ`: mean input component at pattern `γ`.
    pub fn initial(scheme: &InputScheme, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_FUNCTION_ARITY {
            return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_FUNCTION_ARITY });
        }
        scheme.validate()?;
        Self::new((0..1usize << n).map(|g| scheme.mean_input(n, g)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self, g: &Gate) -> Self {
        MagnetizationState { values: self.values.iter().map(|&m| magnetization_map(g, m).unwrap()).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceKind {
    /// Every pattern flows to ±1; the limit is a single function.
    SingleFunction(BooleanFunction),
    /// Balanced nonlinear gate with all `m⁰ = 0`: the uniform distribution is
    /// stationary. Attraction is not claimed.
    UniformCandidate,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub kind: ConvergenceKind,
    /// Layers `0..` until convergence or `max_iterations`.
    pub trajectory: Vec<MagnetizationState>,
}

pub fn classify_convergence(g: &Gate, scheme: &InputScheme, n: usize, max_iterations: usize, tol: f64) -> Result<Convergence> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let start = MagnetizationState::initial(scheme, n)?;
    let at_poles = |s: &MagnetizationState| s.values.iter().all(|m| (1.0 - m.abs()) < tol);
    let mut trajectory = vec![start];
    loop {
        let last = trajectory.last().unwrap();
        if at_poles(last) {
            let spins: Vec<i8> = last.values.iter().map(|&m| if m < 0.0 { -1 } else { 1 }).collect();
            let f = BooleanFunction::from_spins(n, &spins)?;
            return Ok(Convergence { kind: ConvergenceKind::SingleFunction(f), trajectory });
        }
        if trajectory.len() > max_iterations {
            break;
        }
        let next = last.step(g);
        trajectory.push(next);
    }
    let props = g.properties();
    let kind = if props.balanced && !props.gf2_linear && trajectory[0].values.iter().all(|&m| m == 0.0) {
        ConvergenceKind::UniformCandidate
    } else {
        ConvergenceKind::Undetermined
    };
    Ok(Convergence { kind, trajectory })
}

/// Rows `(layer, gamma, m)`, `gamma` 1-based.
pub fn write_magnetization_csv<W: Write>(out: W, trajectory: &[MagnetizationState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::MAGNETIZATION_TRAJECTORY)?;
    for (l, s) in trajectory.iter().enumerate() {
        for (g, m) in s.values.iter().enumerate() {
            w.write_record([l.to_string(), (g + 1).to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `(m, m_next)` on a uniform grid over `[-1, 1]`.
pub fn write_magnetization_map_csv<W: Write>(out: W, g: &Gate, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::invalid("need at least two grid points"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema::MAGNETIZATION_MAP)?;
    for i in 0..points {
        let m = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        w.write_record([m.to_string(), magnetization_map(g, m)?.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
