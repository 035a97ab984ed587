//! Finite-width Monte Carlo of random deep networks and random Boolean circuits.
//!
//! Every realization propagates all `2^n` input patterns at once, and the
//! layer-`L` node functions are collected into empirical distributions.
//!
//! Two backends produce realizations with the same law:
//!
//! * [`Backend::Dense`] draws every weight, bias and connection explicitly
//!   (see [`sample_realization`] and [`propagate_all_patterns`]).
//! * [`Backend::Lazy`] draws only what the requested outputs depend on. A
//!   row of Gaussian weights enters only through its projections on the
//!   layer states, so the DNN sampler keeps an orthonormal basis of those
//!   states and draws one coordinate per basis vector and row. The basis is
//!   reset every layer for layer-dependent networks and grows across layers
//!   for recurrent ones, where the same rows are reused. Circuits are
//!   evaluated on the backward light cone of the sampled output nodes only.

mod compare;
mod config;
mod estimate;
mod lazy_circuit;
mod lazy_dnn;
mod overlaps;
mod realization;

pub use compare::{compare_architectures, compare_estimates, compare_seeds, ArchitectureReport, CompareOptions, CompareSeeds};
pub use config::{Architecture, Backend, EnsembleConfig, Machine, NodePolicy};
pub use estimate::{
    estimate_function_distribution, theory_distribution, width_sweep, write_width_sweep_csv, EmpiricalDistribution, WidthSweepRow,
};
pub use overlaps::{measure_overlaps, write_overlap_measurement_csv, OverlapMeasurement};
pub use realization::{propagate_all_patterns, sample_realization, LayerParams, LayerStates, Realization};
