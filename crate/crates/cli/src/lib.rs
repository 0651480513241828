//! Experiment orchestration for the forced-oscillation locator: spec files,
//! scenario construction, end-to-end runs, sweeps, and the Fourier baseline.

pub mod config;
pub mod desk;
pub mod experiment;
pub mod fourier;
pub mod scenario;
pub mod sweep;

pub use config::{ExperimentSpec, GeneratorSpec, GridSpec};
pub use experiment::{
    majority_vote, resolve_scenario, run_experiment, run_pipeline, ExperimentOutcome,
    ExperimentReport, Overrides, PipelineRun,
};
pub use fourier::{run_fourier_baseline, FourierBaseline};
pub use scenario::{build_scenario, BuiltScenario, ScenarioKind};
pub use sweep::{cell_seed, run_sweep, SweepCell, SweepResult};
