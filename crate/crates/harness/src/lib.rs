//! Experiment runner for the `otasched` schedulers.
//!
//! A declarative [`config::ExperimentSpec`] describes a Monte-Carlo sweep;
//! [`experiment::run_experiment`] executes it across worker threads and
//! returns [`output::ResultRow`]s, which [`output::emit_csv`] writes out.

pub mod config;
pub mod experiment;
pub mod output;
pub mod seeding;

pub use config::{ExperimentKind, ExperimentSpec, Variant};
pub use experiment::{run_experiment, run_runtime_scaling};
pub use output::{emit_csv, emit_plot, read_csv, PlotAxes, ResultRow, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment spec:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Compute(#[from] otasched::Error),
}

impl HarnessError {
    /// Process exit code: 1 for invalid input, 2 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Compute(_) => 1,
            HarnessError::Io(_) => 2,
        }
    }
}

/// Plot layout matching an experiment kind.
pub fn plot_axes(kind: ExperimentKind) -> PlotAxes {
    match kind {
        ExperimentKind::DeltaSweep => PlotAxes::SizeVsDelta,
        ExperimentKind::RuntimeScaling => PlotAxes::RuntimeVsDevices,
        ExperimentKind::OtaFl => PlotAxes::EfficiencyVsGamma,
        _ => PlotAxes::SizeVsGamma,
    }
}
