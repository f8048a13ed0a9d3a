//! The end-to-end SRB experiment: source/target selection, disintegration of
//! the stationary measure onto u-graphs, pushed-forward leaf stacks, nested
//! transverse partitions, conditional-density estimation, and the
//! entropy-formula consistency check.

mod density;
mod experiment;
mod source;

pub use density::{
    build_nested_partition, conditional_density_check, predicted_leaf_density, BandHistogram,
    CellDensityRow, DensityReport, LeafDensity, NestedPartition, PartitionCell,
};
pub use experiment::{
    entropy_consistency, run_srb_experiment, DepthReport, EntropyCheck, SrbExperimentReport,
};
pub use source::{
    calibrate_l0, disintegrate_source, find_source_target, qualify_uniform, sample_source_ball,
    ExperimentConfig, SourceTarget, SourceTargetSelection,
};
