//! Mean-field dynamics of random Boolean circuit ensembles.
//!
//! The distribution of node functions evolves layer by layer as a gas of
//! functions undergoing `k`-body collisions through a fixed gate.

mod evolve;
mod magnetization;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use evolve::{evolve_exact, evolve_noisy, evolve_sampled, NoisyStep, EXACT_WORK_BUDGET};
pub use magnetization::{
    classify_convergence, magnetization_map, write_magnetization_csv, write_magnetization_map_csv, Convergence, ConvergenceKind,
    MagnetizationState, DEFAULT_CONVERGENCE_TOL, DEFAULT_MAX_ITERATIONS,
};
pub use trajectory::{circuit_entropy_curve, evolve_trajectory, trajectory_to_json, write_distribution_trajectory_csv};

use crate::function_space::FunctionDistribution;
use crate::logic::{Gate, InputScheme, MAX_FUNCTION_ARITY};
use crate::{Error, Result};

/// One gate type per run, with annealed noise `epsilon` (per evaluation)
/// and quenched negation probability `p_negate` (per gate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitEnsembleSpec {
    pub gate: Gate,
    pub n: usize,
    pub epsilon: f64,
    pub p_negate: f64,
    pub scheme: InputScheme,
}

impl CircuitEnsembleSpec {
    pub fn new(gate: Gate, n: usize, scheme: InputScheme) -> Result<Self> {
        let s = CircuitEnsembleSpec { gate, n, epsilon: 0.0, p_negate: 0.0, scheme };
        s.validate()?;
        Ok(s)
    }

    pub fn with_noise(mut self, epsilon: f64, p_negate: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.p_negate = p_negate;
        self.validate()?;
        Ok(self)
    }

    pub fn fan_in(&self) -> usize {
        self.gate.fan_in()
    }

    /// `tanh β = 1 − 2ε`; infinite for the noiseless channel.
    pub fn beta(&self) -> f64 {
        (1.0 - 2.0 * self.epsilon).atanh()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_FUNCTION_ARITY {
            return Err(Error::ArityOutOfRange { arity: self.n, min: 1, max: MAX_FUNCTION_ARITY });
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(Error::invalid(format!("annealed noise {} outside [0, 1/2]", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.p_negate) {
            return Err(Error::invalid(format!("negation probability {} outside [0, 1]", self.p_negate)));
        }
        self.scheme.validate()?;
        if let InputScheme::Biased { c } = self.scheme {
            if c.abs() != 1.0 {
                return Err(Error::invalid(format!("circuits need spin inputs; bias constant {c} is not ±1")));
            }
        }
        Ok(())
    }
}

/// Layer-0 distribution: uniform over the input components seen as
/// functions of the pattern (duplicates merge).
pub fn initial_function_distribution(scheme: &InputScheme, n: usize) -> Result<FunctionDistribution> {
    if n == 0 || n > MAX_FUNCTION_ARITY {
        return Err(Error::ArityOutOfRange { arity: n, min: 1, max: MAX_FUNCTION_ARITY });
    }
    let comps = scheme.component_functions(n)?;
    let w = 1.0 / comps.len() as f64;
    FunctionDistribution::from_probabilities(n, comps.into_iter().map(|f| (f, w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::BooleanFunction;

    #[test]
    fn initial_distributions() {
        let d = initial_function_distribution(&InputScheme::Raw, 2).unwrap();
        assert_eq!(d.support_size(), 2);
        for m in 0..2 {
            assert_eq!(d.prob(&BooleanFunction::dictator(2, m).unwrap()), 0.5);
        }
        let d = initial_function_distribution(&InputScheme::Biased { c: 1.0 }, 2).unwrap();
        assert_eq!(d.support_size(), 3);
        assert!((d.prob(&BooleanFunction::constant(2, 1).unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        let d = initial_function_distribution(&InputScheme::Balanced, 2).unwrap();
        assert_eq!(d.support_size(), 6);
        for m in 0..2 {
            let f = BooleanFunction::dictator(2, m).unwrap();
            assert!((d.prob(&f) - 1.0 / 6.0).abs() < 1e-15);
            assert!((d.prob(&f.negate()) - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!((d.prob(&BooleanFunction::constant(2, -1).unwrap()) - 1.0 / 6.0).abs() < 1e-15);
        assert!(initial_function_distribution(&InputScheme::Biased { c: 0.5 }, 2).is_err());
    }

    #[test]
    fn spec_validation() {
        let g = Gate::majority(3).unwrap();
        assert!(CircuitEnsembleSpec::new(g.clone(), 2, InputScheme::Balanced).unwrap().with_noise(0.6, 0.0).is_err());
        assert!(CircuitEnsembleSpec::new(g.clone(), 2, InputScheme::Balanced).unwrap().with_noise(0.1, 1.5).is_err());
        assert!(CircuitEnsembleSpec::new(g.clone(), 0, InputScheme::Balanced).is_err());
        assert!(CircuitEnsembleSpec::new(g, 2, InputScheme::Biased { c: 2.0 }).is_err());
        let s = CircuitEnsembleSpec::new(Gate::and(), 2, InputScheme::Raw).unwrap();
        assert_eq!(s.beta(), f64::INFINITY);
        let s = s.with_noise(0.5, 0.0).unwrap();
        assert_eq!(s.beta(), 0.0);
    }
}
