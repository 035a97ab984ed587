//! Distributions over Boolean functions: construction from Gaussian output
//! fields, analytic large-depth limits, entropy and divergences.

mod distance;
mod distribution;
mod dnn;
mod entropy;

pub use distance::{kl_divergence, kl_divergence_smoothed, support_is_odd, tv_distance, SmoothedKl, DEFAULT_SMOOTHING};
pub use distribution::{DistributionKind, FunctionDistribution};
pub use dnn::{
    dnn_function_distribution, fixed_point_covariance, limit_distribution, DnnMethod, LimitKind,
};
pub use entropy::{
    entropy, entropy_curve, entropy_vs_sigma_b, write_entropy_curve_csv, write_entropy_vs_sigma_b_csv, EntropyEstimator, EntropyPoint, SigmaBPoint,
};
