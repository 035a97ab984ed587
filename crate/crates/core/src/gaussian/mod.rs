//! Gaussian machinery: covariance factorization, sampling, orthant
//! probabilities, quadrature oracles and the anti-diagonal matrix family.

mod antidiag;
mod factor;
mod orthant;
mod quadrature;
mod sample;

pub use antidiag::{anti_diag_identities, AntiDiagIdentities, AntiDiagonalMatrix};
pub use factor::{factor_psd, Covariance, Factor, FactorPolicy};
pub use orthant::bivariate_orthant;
pub use quadrature::{
    expectation_1d, expectation_2d, gauss_hermite_expectation_2d, GaussHermite, GaussLaguerre, GaussLegendre, GaussRadial, Smoothness,
};
pub use sample::{fold_samples, sample_gaussian, SAMPLE_BLOCK};
