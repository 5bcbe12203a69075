//! Reconstruction of a CIS set from outcome statistics.

mod bench;
mod objective;
mod optimize;

pub use bench::{benchmark_iteration, mean_times, TimingRow};
pub use objective::{euclidean_gradient, loss, GradientBundle, LossReport, Objective};
pub use optimize::{
    init_strategy, iqct_baseline, reconstruct, reconstruct_masked, riemannian_norm, InitStrategy, OptimizerConfig,
    ReconstructionResult, Termination,
};

#[cfg(test)]
mod tests;
