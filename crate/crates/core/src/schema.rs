//! Column names of every CSV artifact and key names of JSON artifacts.
//!
//! These are the contract with downstream plotting scripts; the same names
//! are listed in `schema/columns.json` at the repository root.

pub const KERNEL_SCAN: [&str; 2] = ["q", "q_next"];
pub const OVERLAP_TRAJECTORY: [&str; 4] = ["layer", "gamma", "gamma_prime", "q"];
pub const FIXED_POINT_SCAN: [&str; 3] = ["sigma_b", "q_star", "stable"];
pub const ENTROPY_CURVE: [&str; 5] = ["L", "entropy_nats", "entropy_normalized", "samples", "seed"];
pub const ENTROPY_VS_SIGMA_B: [&str; 6] = ["sigma_b", "q_star", "entropy_nats", "entropy_normalized", "samples", "seed"];
pub const DISTRIBUTION_TRAJECTORY: [&str; 3] = ["layer", "f_hex", "p"];
pub const MAGNETIZATION_TRAJECTORY: [&str; 3] = ["layer", "gamma", "m"];
pub const MAGNETIZATION_MAP: [&str; 2] = ["m", "m_next"];
pub const OVERLAP_MEASUREMENT: [&str; 6] = ["l", "l_prime", "gamma", "gamma_prime", "q_hat", "stderr"];
pub const WIDTH_SWEEP: [&str; 5] = ["N", "kl_to_theory", "tv_to_theory", "realizations", "seed"];

/// Keys of the distribution JSON document.
pub const DISTRIBUTION_JSON_KEYS: [&str; 3] = ["n", "kind", "entries"];
/// Keys of one distribution entry.
pub const DISTRIBUTION_ENTRY_KEYS: [&str; 2] = ["f", "p"];

/// All CSV schemas by artifact name.
pub fn csv_schemas() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("kernel_scan", KERNEL_SCAN.to_vec()),
        ("overlap_trajectory", OVERLAP_TRAJECTORY.to_vec()),
        ("fixed_point_scan", FIXED_POINT_SCAN.to_vec()),
        ("entropy_curve", ENTROPY_CURVE.to_vec()),
        ("entropy_vs_sigma_b", ENTROPY_VS_SIGMA_B.to_vec()),
        ("distribution_trajectory", DISTRIBUTION_TRAJECTORY.to_vec()),
        ("magnetization_trajectory", MAGNETIZATION_TRAJECTORY.to_vec()),
        ("magnetization_map", MAGNETIZATION_MAP.to_vec()),
        ("overlap_measurement", OVERLAP_MEASUREMENT.to_vec()),
        ("width_sweep", WIDTH_SWEEP.to_vec()),
    ]
}
