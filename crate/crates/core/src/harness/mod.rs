//! Experiment orchestration: configuration, trial and ensemble runners,
//! statistics, and file I/O.

pub mod config;
pub mod io;
pub mod trial;

pub use config::{
    C0RegionConfig, ExperimentConfig, NoiseMode, PreparationMode, StatePreset, TurbulenceMode,
};
pub use trial::{
    compute_stats, run_ensemble, run_trial, EnsembleOutcome, EnsembleStats, Histogram,
    TrialFailure, TrialRecord,
};
