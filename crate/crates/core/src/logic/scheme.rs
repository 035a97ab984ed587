use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::function::BooleanFunction;
use super::patterns::pattern_spin;
use crate::{Error, Result};

/// How the raw pattern `s` is presented to layer 0.
///
/// * `Raw`: `s` itself, `|S^I| = n`.
/// * `Biased { c }`: `(s, c)`, one constant component, `|S^I| = n + 1`.
/// * `Balanced`: `(s, -s, 1, -1)`, `|S^I| = 2n + 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InputScheme {
    Raw,
    Biased { c: f64 },
    Balanced,
}

impl InputScheme {
    pub fn validate(&self) -> Result<()> {
        if let InputScheme::Biased { c } = self {
            if !c.is_finite() || *c == 0.0 {
                return Err(Error::invalid(format!("bias constant must be finite and nonzero, got {c}")));
            }
        }
        Ok(())
    }

    /// Number of components `|S^I|` for arity `n`.
    pub fn len(&self, n: usize) -> usize {
        match self {
            InputScheme::Raw => n,
            InputScheme::Biased { .. } => n + 1,
            InputScheme::Balanced => 2 * n + 2,
        }
    }

    /// Component `m` of `S^I` evaluated on pattern `gamma`.
    pub fn component(&self, n: usize, m: usize, gamma: usize) -> f64 {
        match *self {
            InputScheme::Raw => pattern_spin(n, gamma, m) as f64,
            InputScheme::Biased { c } => {
                if m < n {
                    pattern_spin(n, gamma, m) as f64
                } else {
                    c
                }
            }
            InputScheme::Balanced => {
                if m < n {
                    pattern_spin(n, gamma, m) as f64
                } else if m < 2 * n {
                    -(pattern_spin(n, gamma, m - n) as f64)
                } else if m == 2 * n {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// The augmented vector `S^I(s_gamma)`.
    pub fn augment(&self, n: usize, gamma: usize) -> Vec<f64> {
        (0..self.len(n)).map(|m| self.component(n, m, gamma)).collect()
    }

    /// Layer-0 overlap between patterns `g` and `h`, normalized so the
    /// self-overlap is one.
    pub fn initial_overlap(&self, n: usize, g: usize, h: usize) -> f64 {
        let a = self.augment(n, g);
        let b = self.augment(n, h);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let norm: f64 = a.iter().map(|x| x * x).sum();
        dot / norm
    }

    /// Layer-0 overlap as a function of the Hamming distance `d` between
    /// the raw patterns.
    pub fn initial_overlap_at_distance(&self, n: usize, d: usize) -> f64 {
        let agree = n as f64 - 2.0 * d as f64;
        match *self {
            InputScheme::Raw => agree / n as f64,
            InputScheme::Biased { c } => (c * c + agree) / (n as f64 + c * c),
            InputScheme::Balanced => (2.0 * agree + 2.0) / (2.0 * n as f64 + 2.0),
        }
    }

    /// Average component value `(1/|S^I|) Σ_m S^I_m(s_gamma)`.
    pub fn mean_input(&self, n: usize, gamma: usize) -> f64 {
        let l = self.len(n);
        (0..l).map(|m| self.component(n, m, gamma)).sum::<f64>() / l as f64
    }

    /// The layer-0 node functions: component `m` of `S^I` as a function of `s`.
    ///
    /// Requires every component to be a spin, so `Biased { c }` needs `|c| = 1`.
    pub fn component_functions(&self, n: usize) -> Result<Vec<BooleanFunction>> {
        if let InputScheme::Biased { c } = self {
            if c.abs() != 1.0 {
                return Err(Error::invalid(format!(
                    "Boolean inputs need spin-valued components; bias constant {c} is not ±1"
                )));
            }
        }
        let count = 1usize << n;
        (0..self.len(n))
            .map(|m| {
                let spins: Vec<i8> = (0..count).map(|g| self.component(n, m, g) as i8).collect();
                BooleanFunction::from_spins(n, &spins)
            })
            .collect()
    }
}

impl fmt::Display for InputScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputScheme::Raw => write!(f, "raw"),
            InputScheme::Biased { c } => write!(f, "biased:{c}"),
            InputScheme::Balanced => write!(f, "balanced"),
        }
    }
}

impl FromStr for InputScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let scheme = match s.as_str() {
            "raw" => InputScheme::Raw,
            "balanced" => InputScheme::Balanced,
            "biased" => InputScheme::Biased { c: 1.0 },
            _ => match s.strip_prefix("biased:") {
                Some(v) => InputScheme::Biased {
                    c: v.parse().map_err(|_| Error::Parse(format!("bad bias constant '{v}'")))?,
                },
                None => return Err(Error::Parse(format!("unknown input scheme '{s}' (raw, biased[:c], balanced)"))),
            },
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl TryFrom<String> for InputScheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InputScheme> for String {
    fn from(s: InputScheme) -> String {
        s.to_string()
    }
}
