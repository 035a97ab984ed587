use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// A symmetric positive-semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance {
    matrix: DMatrix<f64>,
}

impl Covariance {
    /// Validates shape, finiteness and symmetry (relative tolerance 1e-12).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid(format!("covariance must be square and nonempty, got {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let d = matrix.nrows();
        for i in 0..d {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Covariance { matrix })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Tolerances for [`factor_psd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorPolicy {
    /// Added to the diagonal before factoring.
    pub jitter: f64,
    /// Eigenvalues below `-psd_tolerance * λ_max` are an error; smaller
    /// negative eigenvalues are clipped to zero.
    pub psd_tolerance: f64,
    /// Eigenvalues above `rank_tolerance * λ_max` count toward the rank.
    pub rank_tolerance: f64,
}

impl Default for FactorPolicy {
    fn default() -> Self {
        FactorPolicy { jitter: 0.0, psd_tolerance: 1e-6, rank_tolerance: 1e-10 }
    }
}

/// Lower-triangular `L` with `L Lᵀ = C` (after jitter and clipping).
#[derive(Clone, Debug)]
pub struct Factor {
    lower: DMatrix<f64>,
    rank: usize,
    jitter: f64,
    clipped: bool,
}

impl Factor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Numerical rank of the factored matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Whether the eigenvalue-clipping path was taken (singular or nearly so).
    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }
}

/// Factor a PSD matrix, tolerating rank deficiency.
///
/// Positive-definite input goes through Cholesky. Otherwise the matrix is
/// eigendecomposed, tiny negative eigenvalues are clipped to zero and the
/// square-root factor `V √Λ` is re-triangularized with a QR decomposition.
pub fn factor_psd(cov: &Covariance, policy: FactorPolicy) -> Result<Factor> {
    let d = cov.dim();
    let mut c = cov.matrix().clone();
    if policy.jitter != 0.0 {
        for i in 0..d {
            c[(i, i)] += policy.jitter;
        }
    }
    let eig = SymmetricEigen::new(c.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        if min < 0.0 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, max_eigenvalue: max });
        }
        return Ok(Factor { lower: DMatrix::zeros(d, d), rank: 0, jitter: policy.jitter, clipped: true });
    }
    if min < -policy.psd_tolerance * max {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, max_eigenvalue: max });
    }
    let rank = eig.eigenvalues.iter().filter(|&&l| l > policy.rank_tolerance * max).count();
    if min > policy.rank_tolerance * max {
        if let Some(ch) = c.clone().cholesky() {
            return Ok(Factor { lower: ch.l(), rank, jitter: policy.jitter, clipped: false });
        }
    }
    let mut b = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        b.column_mut(j).scale_mut(s);
    }
    let r = b.transpose().qr().r();
    let mut lower = r.transpose();
    for j in 0..d {
        if lower[(j, j)] < 0.0 {
            lower.column_mut(j).neg_mut();
        }
    }
    Ok(Factor { lower, rank, jitter: policy.jitter, clipped: true })
}
