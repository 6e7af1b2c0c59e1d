use std::path::{Path, PathBuf};

use super::*;
use crate::simnet::AdversaryKind;
use crate::validity::{Budget, Value};
use crate::vector_consensus::VectorBackend;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(name)).unwrap()
}

#[test]
fn protocol_names_round_trip() {
    for p in ["auth", "nonauth", "lowcomm", "universal:auth", "universal:nonauth", "universal:lowcomm", "dissemination"] {
        let parsed: Protocol = p.parse().unwrap();
        assert_eq!(parsed.to_string(), p);
    }
    assert_eq!("universal".parse::<Protocol>().unwrap(), Protocol::Universal(VectorBackend::Auth));
    assert!("universal:paxos".parse::<Protocol>().is_err());
}

#[test]
fn bundled_files_round_trip_byte_for_byte() {
    let mut seen = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let sc = Scenario::from_json(&text).unwrap();
        assert_eq!(sc.to_json(), text, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn schema_errors_are_hard() {
    let sc = Scenario::new("x", 4, 1, Protocol::Vector(VectorBackend::Auth));
    let text = sc.to_json();
    assert_eq!(Scenario::from_json(&text).unwrap(), sc);

    let bumped = text.replace("\"version\": 1", "\"version\": 2");
    assert_eq!(Scenario::from_json(&bumped), Err(HarnessError::Version { found: 2, expected: 1 }));
    let extra = text.replacen("{", "{\n  \"colour\": 3,", 1);
    assert!(matches!(Scenario::from_json(&extra), Err(HarnessError::Schema(_))));
    assert!(matches!(Scenario::from_json("{ nope"), Err(HarnessError::Schema(_))));

    let mut short = sc.clone();
    short.proposals.pop();
    assert!(short.validate().is_err());
    let mut crowded = sc.clone();
    crowded.faulty = 2;
    assert!(crowded.validate().is_err());
    let mut alien = sc.clone();
    alien.proposals[0] = Value(7);
    assert!(alien.validate().is_err());
    let mut bare = Scenario::new("u", 4, 1, Protocol::Universal(VectorBackend::Auth));
    bare.property = None;
    assert!(bare.validate().is_err());
}

#[test]
fn universal_strong_bundle_passes_and_repeats_exactly() {
    let sc = bundled("universal_strong_n4.json");
    let a = run_scenario(&sc, &scenarios_dir(), Budget::default()).unwrap();
    assert!(a.passed(), "{}", a.summary());
    let b = run_scenario(&sc, &scenarios_dir(), Budget::default()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    let csv = String::from_utf8(a.metrics_csv()).unwrap();
    assert!(csv.starts_with("#validus-metrics v1\nn,t,protocol,adversary,seed,msgs_after_gst,words_after_gst,latency\n"));
}

#[test]
fn lower_bound_bundle_exceeds_the_message_floor() {
    let sc = bundled("lowerbound_n10.json");
    let r = run_scenario(&sc, &scenarios_dir(), Budget::default()).unwrap();
    assert!(r.passed(), "{}", r.summary());
    assert_eq!(r.faulty.len(), 2);
    assert!(r.metrics.msgs_after_gst > 4);
}

#[test]
fn unsolvable_properties_are_refused_before_running() {
    let mut sc = Scenario::new("w", 4, 1, Protocol::Universal(VectorBackend::Auth));
    sc.values = vec![Value(0), Value(1), Value(2)];
    sc.proposals = vec![Value(0), Value(1), Value(2), Value(0)];
    sc.property = Some("correct_proposal".into());
    let err = run_scenario(&sc, Path::new("."), Budget::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Universal(crate::universal::UniversalError::LambdaUndefined(_))), "{err}");
}

#[test]
fn check_recomputes_verdicts_and_catches_tampering() {
    let dir = scenarios_dir();
    let runner = Runner::new(Budget::default());
    for name in ["universal_strong_n4.json", "auth_silent_n4.json", "dissemination_n4.json"] {
        let r = runner.run(&bundled(name), &dir).unwrap();
        let trace = r.trace.unwrap();
        let back = check_trace(trace.as_slice(), &dir, &runner).unwrap();
        assert!(back.passed(), "{name}: {:?} {} {:?}", back.structural, back.verdict, back.checks);
    }

    let r = runner.run(&bundled("universal_strong_n4.json"), &dir).unwrap();
    let text = String::from_utf8(r.trace.unwrap()).unwrap();
    let forged: String = text
        .lines()
        .map(|l| if l.contains("\"kind\":\"decide\"") && l.contains("\"proc\":2") { l.replace("\"value\":1", "\"value\":0") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let back = check_trace(forged.as_bytes(), &dir, &runner).unwrap();
    assert!(!back.passed());
    assert!(!back.verdict.agreement);
}

#[test]
fn bench_rows_are_ordered_and_ratios_computed() {
    let mut spec = BenchSpec::new(Protocol::Vector(VectorBackend::Auth), vec![8, 4]);
    spec.seeds = vec![1, 0];
    let rows = bench(&spec, &Runner::new(Budget::default()).keep_trace(false)).unwrap();
    let keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.n, r.seed)).collect();
    assert_eq!(keys, vec![(4, 0), (4, 1), (8, 0), (8, 1)]);
    let ratios = doubling_ratios(&rows);
    assert_eq!(ratios.len(), 1);
    assert_eq!((ratios[0].from_n, ratios[0].to_n), (4, 8));
    assert!(ratios[0].ratio > 1.0);
    let mut out = Vec::new();
    write_bench_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 2 + rows.len());
    assert!(quadratic_fit(&rows).is_some());
}

#[test]
fn short_horizon_is_reported_not_panicked() {
    let mut spec = BenchSpec::new(Protocol::Vector(VectorBackend::Auth), vec![4]);
    spec.adversary = AdversaryKind::Silent;
    spec.gst = 50;
    let runner = Runner::new(Budget::default()).keep_trace(false);
    let mut sc = spec.scenario(4, 0);
    sc.max_ticks = 1;
    let r = runner.run(&sc, Path::new(".")).unwrap();
    assert!(r.verdict.horizon_exceeded && !r.passed());
}
