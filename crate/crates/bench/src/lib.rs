//! Factorial timing experiments over device and sensor counts.

pub mod design;
pub mod error;
pub mod run;
pub mod summary;

pub use design::{trial_seed, ExperimentDesign, Trial};
pub use error::BenchError;
pub use run::{
    read_records, run_design, run_design_blocking, scratch_root, write_failures, write_records,
    DesignRun, HarnessConfig, TrialFailure, TrialRecord,
};
pub use summary::{
    device_scaling, growth_ratios, summarize, write_summary, CellSummary, DeviceScaling, Estimate,
};
