//! Experiment harness around the core engine: batched episodes with derived
//! seeds, per-task metrics and artifacts, deterministic replay of recorded
//! transcripts, and the scripted optimal policies used for benchmarking the
//! engine itself.

pub mod experiment;
pub mod oracle;
pub mod replay;

pub use experiment::{
    run_experiment, EpisodeRecord, ExperimentConfig, ExperimentError, TaskReport,
};
pub use replay::{replay_episode, ReplayError};
