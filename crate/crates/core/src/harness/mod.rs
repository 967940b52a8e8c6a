//! Seeded Monte Carlo harness: counter-based random streams, sampling
//! distributions, replicated risk studies and their file artifacts.
//!
//! Every replicate draws from its own `(seed, stream)` generator and results
//! are aggregated in replicate order, so outputs are identical whatever the
//! thread schedule.

mod dist;
mod experiment;
mod io;
mod rng;
mod table;

pub use dist::Distribution;
pub use experiment::{
    run_experiment, Check, ExperimentConfig, ExperimentId, ExperimentReport, MetricSlope, Relation,
};
pub use io::{read_columns, write_artifacts, write_json, Artifacts, IoError};
pub use rng::{open_unit, replicate_stream, stream_rng};
pub use table::{LogLogSlope, RiskRow, RiskTable};
