use std::io::Write;

use serde::Serialize;

use super::node::{Tick, WordAccounting};
use super::trace::Trace;

pub const METRICS_HEADER: &str = "#validus-metrics v1";
pub const METRICS_COLUMNS: [&str; 8] =
    ["n", "t", "protocol", "adversary", "seed", "msgs_after_gst", "words_after_gst", "latency"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MetricsReport {
    /// Envelopes with a correct sender and `send_time >= gst`.
    pub msgs_after_gst: u64,
    pub words_after_gst: u64,
    /// Correct processes that decided.
    pub decisions: usize,
    /// Latest correct decision time minus GST (negative if everyone decided before GST).
    pub latency: Option<i64>,
}

pub fn count_metrics<O>(trace: &Trace<O>, acc: &WordAccounting) -> MetricsReport {
    let mut msgs = 0;
    let mut words = 0;
    for e in &trace.envelopes {
        if trace.is_correct(e.sender) && e.send_time >= trace.gst {
            msgs += 1;
            words += acc.words(&e.cost);
        }
    }
    let decided: Vec<Tick> = trace
        .decisions()
        .iter()
        .enumerate()
        .filter(|(i, _)| !trace.faulty.iter().any(|f| f.index() == *i))
        .filter_map(|(_, d)| d.map(|(_, t)| t))
        .collect();
    MetricsReport {
        msgs_after_gst: msgs,
        words_after_gst: words,
        decisions: decided.len(),
        latency: decided.iter().max().map(|t| *t as i64 - trace.gst as i64),
    }
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricsRow {
    pub n: usize,
    pub t: usize,
    pub protocol: String,
    pub adversary: String,
    pub seed: u64,
    pub msgs_after_gst: u64,
    pub words_after_gst: u64,
    /// Empty when no correct process decided.
    pub latency: Option<i64>,
}

/// Writes the version line, the column header, and the rows.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.t.to_string(),
            r.protocol.clone(),
            r.adversary.clone(),
            r.seed.to_string(),
            r.msgs_after_gst.to_string(),
            r.words_after_gst.to_string(),
            r.latency.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
}
