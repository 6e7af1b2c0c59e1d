use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use super::*;
use crate::crypto::CryptoMode;
use crate::simnet::{make_adversary, AdversaryKind, BoxedNode, NetworkParams, Schedule, Silent, Simulation, Trace};
use crate::validity::{SystemParams, ValueSpace};

fn even() -> Verify<Value> {
    Rc::new(|v: &Value| v.0 % 2 == 0)
}

fn quad_node(p: ProcessId, params: SystemParams, kr: &Keyring, delta: Tick, v: Value) -> QuadNode<Value> {
    let q = Quad::new(p, params.n(), params.t(), kr.clone(), even(), 0, default_base_timeout(delta));
    QuadNode::new(q, Some(v))
}

type QuadNodes = Vec<BoxedNode<QuadMsg<Value>, QuadTimeout, Value>>;

fn run_quad(params: SystemParams, net: NetworkParams, schedule: Schedule, nodes: QuadNodes, faulty: BTreeSet<ProcessId>) -> Trace<Value> {
    Simulation::new(params, net, schedule, nodes, faulty, 100_000).run()
}

fn views_entered(tr: &Trace<Value>, p: ProcessId) -> Vec<(Tick, u64)> {
    tr.notes("view").filter(|(_, q, _)| *q == p).map(|(t, _, d)| (t, d["view"].as_u64().unwrap())).collect()
}

fn decide_view(tr: &Trace<Value>, p: ProcessId) -> Option<u64> {
    tr.notes("decide").find(|(_, q, _)| *q == p).map(|(_, _, d)| d["view"].as_u64().unwrap())
}

#[test]
fn all_correct_decide_in_first_view() {
    let params = SystemParams::new(4, 1).unwrap();
    let kr = Keyring::generate(params, CryptoMode::Fast, 1);
    let nodes: QuadNodes = params
        .processes()
        .map(|p| Box::new(quad_node(p, params, &kr, 2, Value(2 * p.0 as i64))) as _)
        .collect();
    let tr = run_quad(params, NetworkParams::new(0, 2, 0), Schedule::Synchronous, nodes, BTreeSet::new());
    assert!(tr.validate().is_empty());
    let first = *tr.decision(ProcessId(1)).unwrap().0;
    for p in params.processes() {
        assert_eq!(*tr.decision(p).unwrap().0, first);
        assert_eq!(decide_view(&tr, p), Some(0));
        assert_eq!(views_entered(&tr, p), vec![(0, 0)]);
    }
    assert_eq!(tr.notes("qc").count(), 3);
}

#[test]
fn silent_leader_costs_one_view() {
    let params = SystemParams::new(4, 1).unwrap();
    let kr = Keyring::generate(params, CryptoMode::Fast, 1);
    let nodes: QuadNodes = params
        .processes()
        .map(|p| -> BoxedNode<_, _, _> {
            if p == ProcessId(1) {
                Box::new(Silent::new())
            } else {
                Box::new(quad_node(p, params, &kr, 1, Value(4)))
            }
        })
        .collect();
    let tr = run_quad(params, NetworkParams::new(0, 1, 3), Schedule::Synchronous, nodes, [ProcessId(1)].into());
    for p in tr.correct() {
        assert_eq!(tr.decision(p).map(|d| *d.0), Some(Value(4)));
        assert_eq!(decide_view(&tr, p), Some(1));
    }
}

/// Sends invalid proposals, new-view messages and votes for view after view.
struct Forger {
    kr: Keyring,
    n: usize,
}

impl Node for Forger {
    type Msg = QuadMsg<Value>;
    type Timer = QuadTimeout;
    type Output = Value;

    fn start(&mut self, env: &Env) -> QuadStep<Value> {
        let mut s = Step::new();
        for view in 0..(4 * self.n as u64) {
            let bad = Value(2 * view as i64 + 1);
            s.broadcast(QuadMsg::Propose { view, pair: bad, justify: None });
            s.send(leader(view, self.n), QuadMsg::NewView { view, high: None, pair: Some(bad) });
        }
        s.timer(1, QuadTimeout(0));
        let _ = env;
        s
    }

    fn on_message(&mut self, env: &Env, _: ProcessId, msg: QuadMsg<Value>) -> QuadStep<Value> {
        let mut s = Step::new();
        if let QuadMsg::Propose { view, .. } = msg {
            for phase in [Phase::Prepare, Phase::PreCommit, Phase::Commit] {
                let d = Value(1).digest();
                let part = self.kr.sign_partial(env.me, quad_vote_digest(0, phase, view, &d));
                s.send(leader(view, self.n), QuadMsg::Vote { phase, view, digest: d, part });
            }
        }
        s
    }

    fn on_timer(&mut self, _: &Env, _: QuadTimeout) -> QuadStep<Value> {
        Step::new()
    }
}

fn quad_vote_digest(domain: u64, phase: Phase, view: u64, d: &Digest) -> Digest {
    quad::vote_digest(domain, phase, view, d)
}

#[test]
fn invalid_pairs_are_never_decided() {
    for seed in 0..500u64 {
        let (n, t) = if seed % 2 == 0 { (4, 1) } else { (7, 2) };
        let params = SystemParams::new(n, t).unwrap();
        let kr = Keyring::generate(params, CryptoMode::Fast, seed);
        let faulty: BTreeSet<ProcessId> = (1..=t as u32).map(ProcessId).collect();
        let nodes: QuadNodes = params
            .processes()
            .map(|p| -> BoxedNode<_, _, _> {
                if faulty.contains(&p) {
                    Box::new(Forger { kr: kr.clone(), n })
                } else {
                    Box::new(quad_node(p, params, &kr, 2, Value(2 * (seed as i64 % 3))))
                }
            })
            .collect();
        let tr = run_quad(params, NetworkParams::new(10, 2, seed), Schedule::Random, nodes, faulty.clone());
        assert!(tr.all_correct_decided(), "seed {seed}");
        for p in tr.correct() {
            let d = tr.decision(p).unwrap().0;
            assert_eq!(d.0 % 2, 0, "seed {seed}: invalid decision");
        }
    }
}

fn qc_views(tr: &Trace<Value>) -> Vec<(String, u64, String)> {
    tr.notes("qc")
        .map(|(_, _, d)| (d["phase"].as_str().unwrap().to_string(), d["view"].as_u64().unwrap(), d["digest"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn locks_pin_later_certificates_and_views_stay_bounded() {
    for seed in 0..200u64 {
        let (n, t) = if seed % 2 == 0 { (4, 1) } else { (7, 2) };
        let params = SystemParams::new(n, t).unwrap();
        let kr = Keyring::generate(params, CryptoMode::Fast, seed);
        let space = ValueSpace::symmetric(vec![Value(0), Value(2), Value(4)]).unwrap();
        let adv = make_adversary(&AdversaryKind::EquivocateLeader, params, t).unwrap();
        let proposals: Vec<Value> = (0..n).map(|i| Value(2 * ((seed as i64 + i as i64) % 3))).collect();
        let gst = 5 * (seed % 7);
        let nodes = adv.build(params, &space, &proposals, |p, v| quad_node(p, params, &kr, 2, v));
        let tr = run_quad(params, NetworkParams::new(gst, 2, seed), Schedule::Random, nodes, adv.faulty.clone());
        assert!(tr.all_correct_decided(), "seed {seed}");
        let decided: BTreeSet<Value> = tr.correct().map(|p| *tr.decision(p).unwrap().0).collect();
        assert_eq!(decided.len(), 1, "seed {seed}: disagreement");
        let qcs = qc_views(&tr);
        for (_, _, d) in tr.notes("decide") {
            let (w, digest) = (d["view"].as_u64().unwrap(), d["digest"].as_str().unwrap());
            for (phase, v, other) in &qcs {
                if *v > w {
                    assert_eq!(other, digest, "seed {seed}: {phase} certificate for another value in view {v} > {w}");
                }
            }
        }
        for p in tr.correct() {
            let (_, at) = tr.decision(p).unwrap();
            let after_gst = views_entered(&tr, p).iter().filter(|(time, _)| *time >= gst && *time <= at).count();
            assert!(after_gst <= t + 2, "seed {seed}: {p} entered {after_gst} views after GST");
        }
    }
}

fn run_binary(backend: BinaryBackend, n: usize, t: usize, bits: &[u8], kind: AdversaryKind, seed: u64, gst: Tick) -> Trace<Value> {
    let params = SystemParams::new(n, t).unwrap();
    let kr = Keyring::generate(params, CryptoMode::Fast, seed);
    let count = if kind == AdversaryKind::None { 0 } else { t };
    let adv = make_adversary(&kind, params, count).unwrap();
    let proposals: Vec<Value> = bits.iter().map(|b| Value(*b as i64)).collect();
    let nodes = adv.build(params, &ValueSpace::binary(), &proposals, |p, v| {
        BinaryNode::build(backend, p, n, t, 2, &kr, v.0 as u8)
    });
    Simulation::new(params, NetworkParams::new(gst, 2, seed), Schedule::Random, nodes, adv.faulty.clone(), 200_000).run()
}

#[test]
fn binary_agreement_and_strong_validity_under_mixed_inputs() {
    let kinds = [AdversaryKind::None, AdversaryKind::Silent, AdversaryKind::EquivocateLeader, AdversaryKind::CrashAt { at: 7 }];
    for backend in [BinaryBackend::SignatureFree, BinaryBackend::Provable] {
        for seed in 0..500u64 {
            let (n, t) = [(4, 1), (7, 2), (5, 1)][seed as usize % 3];
            let bits: Vec<u8> = (0..n).map(|i| ((seed >> (i % 8)) & 1) as u8).collect();
            let kind = kinds[(seed / 3) as usize % kinds.len()].clone();
            let tr = run_binary(backend, n, t, &bits, kind.clone(), seed, 4 * (seed % 5));
            assert!(tr.all_correct_decided(), "{backend:?} seed {seed} {kind}: no termination");
            let decided: BTreeMap<ProcessId, Value> = tr.correct().map(|p| (p, *tr.decision(p).unwrap().0)).collect();
            let values: BTreeSet<Value> = decided.values().copied().collect();
            assert_eq!(values.len(), 1, "{backend:?} seed {seed} {kind}: disagreement");
            let correct_bits: BTreeSet<u8> = tr.correct().map(|p| bits[p.index()]).collect();
            if correct_bits.len() == 1 {
                let b = *correct_bits.iter().next().unwrap();
                assert_eq!(values.iter().next().unwrap().0, b as i64, "{backend:?} seed {seed} {kind}: validity");
            }
        }
    }
}

#[test]
fn signed_bit_needs_distinct_signers() {
    let params = SystemParams::new(4, 1).unwrap();
    let kr = Keyring::generate(params, CryptoMode::Fast, 0);
    let m = |b: u8| {
        let mut w = crate::crypto::DigestWriter::new("binary-proposal");
        w.write_u64(0).write_u64(b as u64);
        w.finish().0
    };
    let s1 = kr.sign(ProcessId(1), &m(1));
    let s2 = kr.sign(ProcessId(2), &m(1));
    assert!(verify_signed_bit(&kr, 1, 0, &SignedBit { bit: 1, sigs: vec![s1, s2] }));
    assert!(!verify_signed_bit(&kr, 1, 0, &SignedBit { bit: 1, sigs: vec![s1, s1] }));
    assert!(!verify_signed_bit(&kr, 1, 0, &SignedBit { bit: 0, sigs: vec![s1, s2] }));
    assert!(!verify_signed_bit(&kr, 1, 7, &SignedBit { bit: 1, sigs: vec![s1, s2] }));
}
