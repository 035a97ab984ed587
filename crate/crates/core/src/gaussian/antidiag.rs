use nalgebra::DMatrix;

use crate::{Error, Result};

/// `A_M(κ) = I + κ·J̃`, where `J̃` has ones on the anti-diagonal. `M` even.
///
/// This is the overlap matrix of odd inputs whose only correlation is between
/// a pattern and its negation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntiDiagonalMatrix {
    m: usize,
    kappa: f64,
}

impl AntiDiagonalMatrix {
    pub fn new(m: usize, kappa: f64) -> Result<Self> {
        if m == 0 || m % 2 != 0 {
            return Err(Error::invalid(format!("anti-diagonal dimension must be even and positive, got {m}")));
        }
        if !(kappa.abs() <= 1.0) {
            return Err(Error::invalid(format!("kappa {kappa} outside [-1, 1]")));
        }
        Ok(AntiDiagonalMatrix { m, kappa })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else if i + j == m - 1 {
                self.kappa
            } else {
                0.0
            }
        })
    }

    /// `(1 - κ²)^{M/2}`.
    pub fn determinant(&self) -> f64 {
        (1.0 - self.kappa * self.kappa).powi((self.m / 2) as i32)
    }

    /// `A_M(-κ) / (1 - κ²)`.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let d = 1.0 - self.kappa * self.kappa;
        if d == 0.0 {
            return Err(Error::Singular);
        }
        Ok(AntiDiagonalMatrix { m: self.m, kappa: -self.kappa }.to_dense() / d)
    }

    /// `(eigenvalue, multiplicity)`: `1 + κ` and `1 − κ`, each `M/2` times.
    pub fn eigenvalues(&self) -> [(f64, usize); 2] {
        [(1.0 - self.kappa, self.m / 2), (1.0 + self.kappa, self.m / 2)]
    }
}

#[derive(Clone, Debug)]
pub struct AntiDiagIdentities {
    pub determinant: f64,
    pub inverse: DMatrix<f64>,
    pub eigenvalues: [(f64, usize); 2],
}

/// Closed-form determinant, inverse and spectrum. Errors when `|κ| = 1`.
pub fn anti_diag_identities(a: &AntiDiagonalMatrix) -> Result<AntiDiagIdentities> {
    Ok(AntiDiagIdentities { determinant: a.determinant(), inverse: a.inverse()?, eigenvalues: a.eigenvalues() })
}
