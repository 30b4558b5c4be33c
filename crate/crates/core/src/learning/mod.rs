//! Datasets drawn from the learning-problem form of the PDE, empirical risk
//! minimization over clipped networks, and L² evaluation.

pub mod dataset;
pub mod eval;
pub mod train;

pub use dataset::{generate_dataset, Dataset, Provenance};
pub use eval::{
    bias_variance_report, empirical_risk, grid_points, l2_error, noise_floor, reference_grid,
    write_reference_csv, BiasVarianceConfig, BiasVarianceReport, Oracle, ReferencePoint,
};
pub use train::{initialize, train_erm, FitReport, StepSchedule, TracePoint, TrainConfig};
