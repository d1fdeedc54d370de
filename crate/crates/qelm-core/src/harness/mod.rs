//! Experiment orchestration: scenario configs, the reservoir optimizer,
//! statistics and noise sweeps, diagnostics, benchmark tables, and artifact
//! persistence.

pub mod artifacts;
pub mod config;
pub mod optimizer;
pub mod reports;
pub mod scenario;
pub mod sweeps;

pub use artifacts::{FileEntry, Manifest, RunArtifacts};
pub use config::{Composition, ExperimentConfig, LossModel, SplitSizes};
pub use optimizer::{frame_objective, optimize_reservoir, OptimizeOutcome};
pub use reports::{
    benchmark_shadow_vs_qelm, singular_value_report, throughput_estimate, BenchmarkReport,
    SvdReport, Throughput,
};
pub use scenario::{run_scenario, ScenarioMetrics, SplitEvaluation};
pub use sweeps::{noise_sweep, sweep_statistics, NoiseReport, SweepReport};
