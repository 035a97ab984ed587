use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitEnsembleSpec;
use crate::logic::{Gate, InputScheme, MAX_FUNCTION_ARITY};
use crate::meanfield::{Activation, KernelSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Machine {
    Dnn {
        activation: Activation,
        sigma_w: f64,
        sigma_b: f64,
    },
    Circuit {
        gate: Gate,
        #[serde(default)]
        epsilon: f64,
        #[serde(default)]
        p_negate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Independent parameters at every layer.
    LayerDependent,
    /// One parameter set shared by all layers.
    Recurrent,
}

/// Which layer-`L` nodes a realization contributes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodePolicy {
    /// Node 0 only: one independent sample per realization.
    #[default]
    OneNode,
    /// All `N` nodes; samples within a realization are correlated.
    AllNodes,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Dense,
    #[default]
    Lazy,
}

macro_rules! snake_case_str {
    ($t:ty, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$t>::$v => $s),+ })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($s => Ok(<$t>::$v),)+
                    _ => Err(Error::Parse(format!("unknown {} '{s}'", stringify!($t)))),
                }
            }
        }
    };
}

snake_case_str!(Architecture, LayerDependent => "layer_dependent", Recurrent => "recurrent");
snake_case_str!(NodePolicy, OneNode => "one_node", AllNodes => "all_nodes");
snake_case_str!(Backend, Dense => "dense", Lazy => "lazy");

/// A random machine ensemble.
///
/// DNN preactivations are `H_i = Σ_j W_ij S_j / √N + b_i` with
/// `W_ij ~ N(0, σ_w²)` and `b_i ~ N(0, σ_b²)`; hidden layers apply the
/// activation and layer `L` is read through its sign. Circuit nodes read
/// exactly `k` distinct nodes of the previous layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub machine: Machine,
    pub width: usize,
    pub depth: usize,
    pub n: usize,
    pub scheme: InputScheme,
    pub architecture: Architecture,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::invalid(format!("width must be at least 2, got {}", self.width)));
        }
        if self.width > u32::MAX as usize {
            return Err(Error::invalid("width too large"));
        }
        if self.depth < 1 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        if self.n == 0 || self.n > MAX_FUNCTION_ARITY {
            return Err(Error::ArityOutOfRange { arity: self.n, min: 1, max: MAX_FUNCTION_ARITY });
        }
        self.scheme.validate()?;
        match &self.machine {
            Machine::Dnn { .. } => {
                self.kernel()?;
            }
            Machine::Circuit { gate, .. } => {
                self.circuit_spec()?;
                if gate.fan_in() > self.width {
                    return Err(Error::invalid(format!("fan-in {} exceeds width {}", gate.fan_in(), self.width)));
                }
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        match &self.machine {
            Machine::Dnn { activation, sigma_w, sigma_b } => KernelSpec::new(*activation, *sigma_w, *sigma_b),
            Machine::Circuit { .. } => Err(Error::Unsupported("kernel of a circuit machine".into())),
        }
    }

    pub fn circuit_spec(&self) -> Result<CircuitEnsembleSpec> {
        match &self.machine {
            Machine::Circuit { gate, epsilon, p_negate } => {
                CircuitEnsembleSpec::new(gate.clone(), self.n, self.scheme)?.with_noise(*epsilon, *p_negate)
            }
            Machine::Dnn { .. } => Err(Error::Unsupported("circuit spec of a DNN machine".into())),
        }
    }

    pub fn is_dnn(&self) -> bool {
        matches!(self.machine, Machine::Dnn { .. })
    }

    pub fn num_patterns(&self) -> usize {
        1 << self.n
    }

    pub fn with_architecture(&self, a: Architecture) -> Self {
        EnsembleConfig { architecture: a, ..self.clone() }
    }

    pub fn with_width(&self, width: usize) -> Self {
        EnsembleConfig { width, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EnsembleConfig { seed, ..self.clone() }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: EnsembleConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}
