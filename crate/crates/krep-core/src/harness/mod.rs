//! Stream replay, synthetic workload generation, metrics collection, and
//! the benchmark driver behind the CLI.

mod config;
mod metrics;
mod replay;
mod synth;

pub use config::{BenchConfig, ScoringSection, WorkloadSection};
pub use metrics::{EngineSummary, MetricsReport, QueryRecord, Summary, UpdateRecord};
pub use replay::{bucketize, run_bench, run_bench_core, StreamDriver, WorkloadQuery};
pub use synth::{gen_stream, write_synthetic, StreamParams, Synthetic};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] crate::types::CoreError),
    #[error(transparent)]
    Window(#[from] crate::window::WindowError),
    #[error(transparent)]
    Engine(#[from] crate::engines::EngineError),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
