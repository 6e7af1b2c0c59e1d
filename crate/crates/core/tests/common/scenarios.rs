use rand::seq::SliceRandom;
use rand::Rng;
use validus::core_consensus::BinaryBackend;
use validus::harness::{Protocol, Scenario};
use validus::simnet::{AdversaryKind, Schedule};
use validus::vector_consensus::VectorBackend;
use validus::Value;

/// A small scenario drawn from `rng`, cheap enough to run many times.
pub fn random_scenario(rng: &mut impl Rng, i: usize) -> Scenario {
    let n = *[4usize, 5, 7].choose(rng).unwrap();
    let t = (n - 1) / 3;
    let backend = *VectorBackend::ALL.choose(rng).unwrap();
    let protocol = match rng.gen_range(0..5) {
        0 | 1 => Protocol::Universal(backend),
        2 | 3 => Protocol::Vector(backend),
        _ => Protocol::Dissemination,
    };
    let delta = rng.gen_range(1..=3);
    let gst = rng.gen_range(0..=5) * delta;
    let mut sc = Scenario::new(&format!("random_{i}"), n, t, protocol).timing(gst, delta);
    sc.seed = rng.gen();
    sc.proposals = (0..n).map(|_| Value(rng.gen_range(0..2))).collect();
    sc.adversary = match rng.gen_range(0..4) {
        0 => AdversaryKind::None,
        1 => AdversaryKind::Silent,
        2 => AdversaryKind::CrashAt { at: rng.gen_range(0..=gst + 3 * delta) },
        _ => AdversaryKind::EquivocateLeader,
    };
    sc.faulty = if sc.adversary == AdversaryKind::None { 0 } else { rng.gen_range(1..=t) };
    sc.schedule = [Schedule::Random, Schedule::Synchronous, Schedule::MaxDelay].choose(rng).unwrap().clone();
    sc.binary = if rng.gen_bool(0.5) { BinaryBackend::SignatureFree } else { BinaryBackend::Provable };
    if matches!(protocol, Protocol::Universal(_)) {
        sc.property = Some(["strong", "correct_proposal"].choose(rng).unwrap().to_string());
    }
    sc
}
