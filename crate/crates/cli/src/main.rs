use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use validus::core_consensus::BinaryBackend;
use validus::crypto::CryptoMode;
use validus::harness::{
    bench, check_trace, doubling_ratios, quadratic_fit, write_bench_csv, BenchSpec, HarnessError, Protocol, Runner,
    Scenario,
};
use validus::simnet::{AdversaryKind, Schedule};
use validus::validity::{classify, Budget, SystemParams, ValidityError, ValidityProperty, Value, ValueSpace};

#[derive(Parser)]
#[command(name = "validus", version, about = "Classify validity properties and simulate the consensus protocols that solve them")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a validity property is trivial, solvable, or unsolvable.
    Classify(ClassifyArgs),
    /// Run a scenario file (or one built from flags), write its trace and print verdicts.
    Run(RunArgs),
    /// Sweep system sizes and report message counts and doubling ratios.
    Bench(BenchArgs),
    /// Re-check a trace file against the scenario recorded in it.
    Check(CheckArgs),
}

#[derive(Args)]
struct PropertyArgs {
    /// Builtin property: strong, weak, correct_proposal, interval, constant:<v>.
    #[arg(long, conflicts_with = "property_file")]
    builtin: Option<String>,
    /// Property JSON file.
    #[arg(long)]
    property_file: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    property: PropertyArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    /// Comma-separated values, used as both inputs and outputs.
    #[arg(long, default_value = "0,1", value_delimiter = ',')]
    values: Vec<i64>,
    /// Write the lambda table here instead of printing it.
    #[arg(long)]
    lambda_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON. Without it the scenario is built from the flags.
    scenario: Option<PathBuf>,
    #[command(flatten)]
    property: PropertyArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    gst: Option<u64>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<i64>>,
    /// One proposal per process.
    #[arg(long, value_delimiter = ',')]
    proposals: Option<Vec<i64>>,
    /// auth, nonauth, lowcomm, universal[:backend], dissemination.
    #[arg(long)]
    protocol: Option<String>,
    /// none, silent, crash_at:T, equivocate_leader, lower_bound.
    #[arg(long)]
    adversary: Option<String>,
    /// Number of faulty processes (default t, or 0 with no adversary).
    #[arg(long)]
    faulty: Option<usize>,
    /// immediate, synchronous, max_delay, random.
    #[arg(long)]
    schedule: Option<String>,
    /// signature_free or provable.
    #[arg(long)]
    binary: Option<String>,
    #[arg(long)]
    max_ticks: Option<u64>,
    /// fast or real.
    #[arg(long)]
    crypto_mode: Option<String>,
    /// Trace output (JSON lines). Metrics go next to it as `<name>.metrics.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "auth")]
    protocol: String,
    #[arg(long, default_value = "4,8,16", value_delimiter = ',')]
    ns: Vec<usize>,
    #[arg(long, default_value = "0", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value = "silent")]
    adversary: String,
    #[arg(long, default_value_t = 0)]
    gst: u64,
    #[arg(long, default_value_t = 1)]
    delta: u64,
    #[arg(long, default_value = "0,1", value_delimiter = ',')]
    values: Vec<i64>,
    #[arg(long)]
    builtin: Option<String>,
    /// Flag doubling ratios outside [min_ratio, max_ratio].
    #[arg(long, default_value_t = 3.0)]
    min_ratio: f64,
    #[arg(long, default_value_t = 5.0)]
    max_ratio: f64,
    /// Bench CSV output; printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,
    /// Directory for property and lambda files named in the scenario.
    #[arg(long)]
    base: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Check(a) => cmd_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_budget(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_budget(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(c.downcast_ref::<ValidityError>(), Some(ValidityError::BudgetExceeded { .. }))
            || c.downcast_ref::<HarnessError>().is_some_and(HarnessError::is_budget)
    })
}

fn load_property(p: &PropertyArgs) -> Result<Option<ValidityProperty>> {
    if let Some(name) = &p.builtin {
        return Ok(Some(ValidityProperty::builtin(name)?));
    }
    if let Some(path) = &p.property_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let prop = ValidityProperty::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        return Ok(Some(prop));
    }
    Ok(None)
}

fn values(v: &[i64]) -> Vec<Value> {
    v.iter().copied().map(Value).collect()
}

fn cmd_classify(a: ClassifyArgs) -> Result<bool> {
    let prop = load_property(&a.property)?.ok_or_else(|| anyhow!("give --builtin or --property-file"))?;
    let params = SystemParams::new(a.n, a.t)?;
    let space = ValueSpace::symmetric(values(&a.values))?;
    let report = classify(&prop, params, &space, Budget::from_env())?;
    println!("property: {}", prop.name());
    println!("n = {}, t = {}, values = {:?}", a.n, a.t, a.values);
    println!("verdict: {}", report.verdict);
    if let Some(w) = report.trivial_witness {
        println!("trivial witness: {w}");
    }
    if params.supermajority() {
        println!("similarity condition: {}", if report.cs_holds { "holds" } else { "fails" });
    }
    if let Some(c) = &report.cs_counterexample {
        println!("counterexample: {c}");
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if let Some(table) = &report.lambda {
        match &a.lambda_out {
            Some(path) => {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                table.write_csv(BufWriter::new(f))?;
                println!("lambda: {} entries written to {}", table.len(), path.display());
            }
            None => {
                println!("lambda:");
                table.write_csv(std::io::stdout().lock())?;
            }
        }
    }
    Ok(true)
}

fn scenario_from_flags(a: &RunArgs) -> Result<(Scenario, PathBuf)> {
    let (mut sc, base) = match &a.scenario {
        Some(path) => {
            let sc = Scenario::load(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (sc, base)
        }
        None => {
            let n = a.n.ok_or_else(|| anyhow!("give a scenario file or --n"))?;
            let t = a.t.unwrap_or((n - 1) / 3);
            let protocol: Protocol = a.protocol.as_deref().unwrap_or("universal").parse().map_err(|e: String| anyhow!(e))?;
            (Scenario::new("cli", n, t, protocol), PathBuf::from("."))
        }
    };
    if a.scenario.is_some() {
        if let Some(n) = a.n {
            sc.n = n;
        }
        if let Some(t) = a.t {
            sc.t = t;
        }
        if let Some(p) = &a.protocol {
            sc.protocol = p.parse().map_err(|e: String| anyhow!(e))?;
        }
    }
    if a.gst.is_some() || a.delta.is_some() {
        sc = sc.clone().timing(a.gst.unwrap_or(sc.gst), a.delta.unwrap_or(sc.delta));
    }
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(v) = &a.values {
        sc.values = values(v);
        if a.proposals.is_none() {
            sc.proposals = (0..sc.n).map(|i| sc.values[i % sc.values.len()]).collect();
        }
    }
    if let Some(p) = &a.proposals {
        sc.proposals = values(p);
    } else if sc.proposals.len() != sc.n {
        sc.proposals = (0..sc.n).map(|i| sc.values[i % sc.values.len()]).collect();
    }
    if let Some(b) = &a.property.builtin {
        ValidityProperty::builtin(b)?;
        sc.property = Some(b.clone());
        sc.lambda = None;
    }
    if let Some(f) = &a.property.property_file {
        sc.property = Some(std::fs::canonicalize(f).with_context(|| format!("reading {}", f.display()))?.display().to_string());
        sc.lambda = None;
    }
    if let Some(adv) = &a.adversary {
        sc.adversary = adv.parse::<AdversaryKind>()?;
        sc.faulty = if sc.adversary == AdversaryKind::None { 0 } else { sc.t };
    }
    if let Some(f) = a.faulty {
        sc.faulty = f;
    }
    if let Some(s) = &a.schedule {
        sc.schedule = match s.as_str() {
            "immediate" => Schedule::Immediate,
            "synchronous" => Schedule::Synchronous,
            "max_delay" => Schedule::MaxDelay,
            "random" => Schedule::Random,
            other => bail!("unknown schedule `{other}` (partition schedules need a scenario file)"),
        };
    }
    if let Some(b) = &a.binary {
        sc.binary = match b.as_str() {
            "signature_free" => BinaryBackend::SignatureFree,
            "provable" => BinaryBackend::Provable,
            other => bail!("unknown binary backend `{other}`"),
        };
    }
    if let Some(m) = a.max_ticks {
        sc.max_ticks = m;
    }
    if let Some(m) = &a.crypto_mode {
        sc.crypto_mode = match m.as_str() {
            "fast" => CryptoMode::Fast,
            "real" => CryptoMode::Real,
            other => bail!("unknown crypto mode `{other}`"),
        };
    }
    sc.validate()?;
    Ok((sc, base))
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let (sc, base) = scenario_from_flags(&a)?;
    let runner = Runner::new(Budget::from_env()).keep_trace(a.out.is_some());
    let report = runner.run(&sc, &base)?;
    println!("scenario: {} ({}, n = {}, t = {}, adversary {})", sc.name, sc.protocol, sc.n, sc.t, sc.adversary);
    println!("verdict: {}", report.verdict);
    if report.verdict.horizon_exceeded {
        println!("horizon_exceeded: max_ticks = {}", sc.max_ticks);
    }
    for d in report.verdict.details.iter().chain(&report.checks) {
        println!("  {d}");
    }
    let m = &report.metrics;
    println!(
        "msgs_after_gst = {}, words_after_gst = {}, latency = {}",
        m.msgs_after_gst,
        m.words_after_gst,
        m.latency.map_or("-".to_string(), |l| l.to_string())
    );
    if let Some(out) = &a.out {
        std::fs::write(out, report.trace.as_deref().unwrap_or_default()).with_context(|| format!("writing {}", out.display()))?;
        let metrics = out.with_extension("metrics.csv");
        std::fs::write(&metrics, report.metrics_csv()).with_context(|| format!("writing {}", metrics.display()))?;
        println!("trace: {}", out.display());
        println!("metrics: {}", metrics.display());
    }
    let ok = report.passed();
    println!("result: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let protocol: Protocol = a.protocol.parse().map_err(|e: String| anyhow!(e))?;
    let mut spec = BenchSpec::new(protocol, a.ns.clone());
    spec.seeds = a.seeds.clone();
    spec.adversary = a.adversary.parse()?;
    spec.gst = a.gst;
    spec.delta = a.delta;
    spec.values = values(&a.values);
    if a.builtin.is_some() {
        spec.property = a.builtin.clone();
    }
    let rows = bench(&spec, &Runner::new(Budget::from_env()).keep_trace(false))?;
    match &a.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            write_bench_csv(&mut w, &rows)?;
            w.flush()?;
            println!("rows: {} written to {}", rows.len(), path.display());
        }
        None => write_bench_csv(std::io::stdout().lock(), &rows)?,
    }
    let mut ok = true;
    for r in doubling_ratios(&rows) {
        let flagged = r.ratio < a.min_ratio || r.ratio > a.max_ratio;
        ok &= !flagged;
        println!(
            "ratio msgs(n={})/msgs(n={}) = {:.3}{}",
            r.to_n,
            r.from_n,
            r.ratio,
            if flagged { format!("  FLAGGED: outside [{}, {}]", a.min_ratio, a.max_ratio) } else { String::new() }
        );
    }
    if let Some((c, residual)) = quadratic_fit(&rows) {
        println!("fit: words_after_gst ~ {c:.3} * n^2, max relative residual {:.1}%", residual * 100.0);
    }
    Ok(ok)
}

fn cmd_check(a: CheckArgs) -> Result<bool> {
    let f = File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?;
    let base = a.base.clone().unwrap_or_else(|| a.trace.parent().map(Path::to_path_buf).unwrap_or_default());
    let report = check_trace(BufReader::new(f), &base, &Runner::new(Budget::from_env()))?;
    println!("scenario: {} ({})", report.scenario.name, report.scenario.protocol);
    for s in &report.structural {
        println!("  model violation: {s}");
    }
    println!("verdict: {}", report.verdict);
    for d in report.verdict.details.iter().chain(&report.checks) {
        println!("  {d}");
    }
    let ok = report.passed();
    println!("result: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}
