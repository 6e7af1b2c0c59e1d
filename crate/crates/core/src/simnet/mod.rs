//! Deterministic discrete-event simulation of a partially synchronous network.
//!
//! Processes are [`Node`] automata. The simulator owns them, delivers every message
//! within the post-GST bound chosen by a [`Schedule`], records a [`Trace`], and derives
//! message and word counts from it.

mod adversary;
mod check;
mod metrics;
mod node;
mod schedule;
mod sim;
mod trace;

pub use adversary::{make_adversary, Adversary, AdversaryKind, CrashAt, LowerBound, Silent, Split};
pub use check::{check_consensus, check_vector, sim_intersection, Verdict};
pub use metrics::{count_metrics, write_metrics_csv, MetricsReport, MetricsRow, METRICS_COLUMNS, METRICS_HEADER};
pub use node::{BoxedNode, Env, Message, Node, Note, Step, Target, Tick, WordAccounting, WordCost};
pub use schedule::{NetworkParams, Schedule};
pub use sim::Simulation;
pub use trace::{read_jsonl, EnvelopeRecord, Event, EventKind, Trace, TraceFile, TRACE_SCHEMA, TRACE_VERSION};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("unknown adversary kind `{0}`")]
    UnknownAdversary(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },
}
