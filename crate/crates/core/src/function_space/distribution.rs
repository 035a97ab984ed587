use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::logic::BooleanFunction;
use crate::{Error, Result};

/// Normalization tolerance for exact distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

impl DistributionKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DistributionKind::Exact => "exact",
            DistributionKind::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Sparse probability map over Boolean functions of a fixed arity.
///
/// Only functions with positive probability are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDistribution {
    n: usize,
    probs: BTreeMap<BooleanFunction, f64>,
    kind: DistributionKind,
}

impl FunctionDistribution {
    /// Exact distribution; duplicates are summed, zeros dropped.
    pub fn from_probabilities(n: usize, entries: impl IntoIterator<Item = (BooleanFunction, f64)>) -> Result<Self> {
        let mut probs = BTreeMap::new();
        for (f, p) in entries {
            if f.arity() != n {
                return Err(Error::ArityMismatch { expected: n, found: f.arity() });
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("probability {p} for {f}")));
            }
            if p > 0.0 {
                *probs.entry(f).or_insert(0.0) += p;
            }
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(FunctionDistribution { n, probs, kind: DistributionKind::Exact })
    }

    /// Exact distribution from nonnegative weights, divided by their sum.
    pub fn from_weights(n: usize, entries: impl IntoIterator<Item = (BooleanFunction, f64)>) -> Result<Self> {
        let v: Vec<(BooleanFunction, f64)> = entries.into_iter().collect();
        let total: f64 = v.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights sum to zero"));
        }
        Self::from_probabilities(n, v.into_iter().map(|(f, w)| (f, w / total)))
    }

    /// Empirical frequencies from sample counts.
    pub fn from_counts(n: usize, counts: impl IntoIterator<Item = (BooleanFunction, u64)>, seed: u64) -> Result<Self> {
        let mut c: BTreeMap<BooleanFunction, u64> = BTreeMap::new();
        for (f, k) in counts {
            if f.arity() != n {
                return Err(Error::ArityMismatch { expected: n, found: f.arity() });
            }
            if k > 0 {
                *c.entry(f).or_insert(0) += k;
            }
        }
        let total: u64 = c.values().sum();
        if total == 0 {
            return Err(Error::invalid("no samples"));
        }
        let probs = c.into_iter().map(|(f, k)| (f, k as f64 / total as f64)).collect();
        Ok(FunctionDistribution { n, probs, kind: DistributionKind::MonteCarlo { samples: total, seed } })
    }

    pub fn point_mass(f: BooleanFunction) -> Self {
        FunctionDistribution { n: f.arity(), probs: BTreeMap::from([(f, 1.0)]), kind: DistributionKind::Exact }
    }

    /// Uniform over the given distinct functions.
    pub fn uniform_over(n: usize, support: impl IntoIterator<Item = BooleanFunction>) -> Result<Self> {
        let s: Vec<BooleanFunction> = support.into_iter().collect();
        if s.is_empty() {
            return Err(Error::invalid("empty support"));
        }
        let p = 1.0 / s.len() as f64;
        Self::from_probabilities(n, s.into_iter().map(|f| (f, p)))
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub(crate) fn with_kind(mut self, kind: DistributionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn prob(&self, f: &BooleanFunction) -> f64 {
        self.probs.get(f).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BooleanFunction, &f64)> {
        self.probs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &BooleanFunction> {
        self.probs.keys()
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// `m_γ = Σ_f P(f) f(s_γ)`.
    pub fn magnetization(&self, gamma: usize) -> f64 {
        self.probs.iter().map(|(f, p)| p * f.spin(gamma) as f64).sum()
    }

    pub fn magnetizations(&self) -> Vec<f64> {
        (0..1usize << self.n).map(|g| self.magnetization(g)).collect()
    }

    /// Distribution of `-f`.
    pub fn negated(&self) -> Self {
        FunctionDistribution { n: self.n, probs: self.probs.iter().map(|(f, p)| (f.negate(), *p)).collect(), kind: self.kind }
    }

    /// JSON document `{"n", "kind", "entries": [{"f", "p"}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> =
            self.probs.iter().map(|(f, p)| serde_json::json!({"f": format!("{:#x}", f.code()), "p": p})).collect();
        serde_json::json!({"n": self.n, "kind": self.kind.tag(), "entries": entries})
    }

    /// Parses the JSON document. Sample count and seed of Monte Carlo
    /// distributions are not part of the document and read back as zero.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("distribution JSON: {what}"));
        let n = v.get("n").and_then(|x| x.as_u64()).ok_or_else(|| bad("missing integer 'n'"))? as usize;
        let kind = match v.get("kind").and_then(|x| x.as_str()) {
            Some("exact") => DistributionKind::Exact,
            Some("monte_carlo") => DistributionKind::MonteCarlo { samples: 0, seed: 0 },
            _ => return Err(bad("'kind' must be \"exact\" or \"monte_carlo\"")),
        };
        let entries = v.get("entries").and_then(|x| x.as_array()).ok_or_else(|| bad("missing array 'entries'"))?;
        let mut parsed = Vec::with_capacity(entries.len());
        for e in entries {
            let f = e.get("f").and_then(|x| x.as_str()).ok_or_else(|| bad("entry without string 'f'"))?;
            let p = e.get("p").and_then(|x| x.as_f64()).ok_or_else(|| bad("entry without number 'p'"))?;
            parsed.push((crate::logic::function::parse_hex(n, f)?, p));
        }
        Ok(Self::from_probabilities(n, parsed)?.with_kind(kind))
    }
}
