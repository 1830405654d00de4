//! Agreement between partitions, rank and linear correlation tests, and
//! energy distance between point clouds.

mod correlation;
mod energy;
mod partition;

pub use correlation::{correlation_test, rank_average, CorrelationMethod, CorrelationResult, PValueMode};
pub use energy::{energy_distance, energy_test, EnergyTest};
pub use partition::{
    confusion_matrix, partition_metrics, partition_metrics_with, write_metrics_csv, Confusion, MetricReport,
    NmiNormalization,
};
