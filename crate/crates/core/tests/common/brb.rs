use std::collections::BTreeMap;

use validus::broadcast::BrbNode;
use validus::simnet::{make_adversary, AdversaryKind, NetworkParams, Schedule, Simulation};
use validus::{ProcessId, SystemParams, Value, ValueSpace};

/// One reliable-broadcast run at `(4, 1)`: P1 equivocates, P2 is correct and broadcasts
/// `1`. Returns the violations found.
pub fn equivocation_run(seed: u64) -> Vec<String> {
    let params = SystemParams::new(4, 1).unwrap();
    let adv = make_adversary(&AdversaryKind::EquivocateLeader, params, 1).unwrap();
    let proposals = [Value(0), Value(1), Value(0), Value(0)];
    let nodes = adv.build(params, &ValueSpace::binary(), &proposals, |p, v| {
        BrbNode::new(4, 1, (p.0 <= 2).then_some(v))
    });
    let net = NetworkParams::new(seed % 11, 1 + seed % 3, seed);
    let horizon = net.gst + 40 * net.delta;
    let tr = Simulation::new(params, net, Schedule::Random, nodes, adv.faulty.clone(), horizon).run();

    let mut problems = Vec::new();
    let mut delivered: BTreeMap<ProcessId, BTreeMap<ProcessId, Value>> = BTreeMap::new();
    for p in tr.correct() {
        let mine = delivered.entry(p).or_default();
        for ((origin, v), _) in tr.outputs_of(p) {
            if mine.insert(*origin, *v).is_some() {
                problems.push(format!("seed {seed}: {p} delivered twice from {origin}"));
            }
        }
    }
    let correct: Vec<ProcessId> = tr.correct().collect();
    for origin in params.processes() {
        let values: Vec<Option<Value>> = correct.iter().map(|p| delivered[p].get(&origin).copied()).collect();
        let some: Vec<Value> = values.iter().flatten().copied().collect();
        if some.windows(2).any(|w| w[0] != w[1]) {
            problems.push(format!("seed {seed}: conflicting deliveries from {origin}: {values:?}"));
        }
        if !some.is_empty() && some.len() != values.len() {
            problems.push(format!("seed {seed}: partial delivery from {origin}: {values:?}"));
        }
        if origin.0 > 2 && !some.is_empty() {
            problems.push(format!("seed {seed}: delivery from {origin}, which never broadcast"));
        }
    }
    for p in &correct {
        if delivered[p].get(&ProcessId(2)) != Some(&Value(1)) {
            problems.push(format!("seed {seed}: {p} missed the correct broadcast"));
        }
    }
    problems
}
