use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::run::Runner;
use super::scenario::{Protocol, Scenario};
use super::HarnessError;
use crate::simnet::{AdversaryKind, Schedule, Tick};
use crate::validity::Value;

pub const BENCH_HEADER: &str = "#validus-bench v1";
pub const BENCH_COLUMNS: [&str; 9] =
    ["n", "t", "protocol", "adversary", "seed", "msgs_after_gst", "words_after_gst", "latency_ticks", "verdicts"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub t: usize,
    pub protocol: String,
    pub adversary: String,
    pub seed: u64,
    pub msgs_after_gst: u64,
    pub words_after_gst: u64,
    pub latency_ticks: Option<i64>,
    /// `pass`, or the failed checks.
    pub verdicts: String,
}

/// A sweep over system sizes with `t = floor((n - 1) / 3)`.
#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub protocol: Protocol,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub adversary: AdversaryKind,
    pub gst: Tick,
    pub delta: Tick,
    pub values: Vec<Value>,
    pub property: Option<String>,
    pub schedule: Schedule,
}

impl BenchSpec {
    /// Silent faults, GST 0, delta 1, synchronous delivery, one seed.
    pub fn new(protocol: Protocol, ns: Vec<usize>) -> Self {
        BenchSpec {
            protocol,
            ns,
            seeds: vec![0],
            adversary: AdversaryKind::Silent,
            gst: 0,
            delta: 1,
            values: vec![Value(0), Value(1)],
            property: matches!(protocol, Protocol::Universal(_)).then(|| "strong".to_string()),
            schedule: Schedule::Synchronous,
        }
    }

    /// The scenario for one sweep point.
    pub fn scenario(&self, n: usize, seed: u64) -> Scenario {
        let t = (n - 1) / 3;
        let mut sc = Scenario::new(&format!("bench_{}_n{n}_s{seed}", self.protocol), n, t, self.protocol)
            .timing(self.gst, self.delta);
        sc.seed = seed;
        sc.proposals = (0..n).map(|i| self.values[i % self.values.len()]).collect();
        sc.values = self.values.clone();
        sc.property = self.property.clone();
        sc.adversary = self.adversary.clone();
        sc.faulty = if self.adversary == AdversaryKind::None { 0 } else { t };
        sc.schedule = self.schedule.clone();
        sc
    }
}

/// Runs the sweep in parallel. Rows come back ordered by `(n, seed)`. A failed verdict
/// aborts with the offending scenario.
pub fn bench(spec: &BenchSpec, runner: &Runner) -> Result<Vec<BenchRow>, HarnessError> {
    let mut points: Vec<(usize, u64)> = spec.ns.iter().flat_map(|&n| spec.seeds.iter().map(move |&s| (n, s))).collect();
    points.sort_unstable();
    points.dedup();
    let base = Path::new(".");
    let results: Vec<Result<BenchRow, HarnessError>> = points
        .par_iter()
        .map(|&(n, seed)| {
            let sc = spec.scenario(n, seed);
            let r = runner.run(&sc, base)?;
            if !r.passed() {
                return Err(HarnessError::VerdictFailed { scenario: sc.to_json(), details: r.summary() });
            }
            Ok(BenchRow {
                n,
                t: sc.t,
                protocol: sc.protocol.to_string(),
                adversary: sc.adversary.to_string(),
                seed,
                msgs_after_gst: r.metrics.msgs_after_gst,
                words_after_gst: r.metrics.words_after_gst,
                latency_ticks: r.metrics.latency,
                verdicts: "pass".into(),
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn write_bench_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.t.to_string(),
            r.protocol.clone(),
            r.adversary.clone(),
            r.seed.to_string(),
            r.msgs_after_gst.to_string(),
            r.words_after_gst.to_string(),
            r.latency_ticks.map(|l| l.to_string()).unwrap_or_default(),
            r.verdicts.clone(),
        ])?;
    }
    w.flush()
}

/// `metric(2n) / metric(n)` for every pair of swept sizes where one doubles the other.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DoublingRatio {
    pub from_n: usize,
    pub to_n: usize,
    pub ratio: f64,
}

fn mean_by_n(rows: &[BenchRow], metric: impl Fn(&BenchRow) -> u64) -> BTreeMap<usize, f64> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.verdicts == "pass") {
        let e = sums.entry(r.n).or_default();
        e.0 += metric(r) as f64;
        e.1 += 1;
    }
    sums.into_iter().map(|(n, (s, k))| (n, s / k as f64)).collect()
}

/// Doubling ratios of the mean message count; only passing rows count.
pub fn doubling_ratios(rows: &[BenchRow]) -> Vec<DoublingRatio> {
    let means = mean_by_n(rows, |r| r.msgs_after_gst);
    means
        .iter()
        .filter_map(|(&n, &m)| means.get(&(2 * n)).map(|&m2| DoublingRatio { from_n: n, to_n: 2 * n, ratio: m2 / m }))
        .collect()
}

/// Least-squares `C` for `words ~ C n^2` and the largest relative residual.
pub fn quadratic_fit(rows: &[BenchRow]) -> Option<(f64, f64)> {
    let means = mean_by_n(rows, |r| r.words_after_gst);
    if means.is_empty() {
        return None;
    }
    let (num, den) = means.iter().fold((0.0, 0.0), |(a, b), (&n, &w)| {
        let x = (n * n) as f64;
        (a + x * w, b + x * x)
    });
    let c = num / den;
    let residual = means
        .iter()
        .map(|(&n, &w)| ((w - c * (n * n) as f64) / w).abs())
        .fold(0.0, f64::max);
    Some((c, residual))
}
