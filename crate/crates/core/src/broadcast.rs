//! Best-effort, Byzantine reliable, and slow broadcast.
//!
//! Reliable and slow broadcast are sub-protocols: they emit steps over their own message
//! types, which a parent lifts into its message enum with [`Step::lift`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Debug;

use crate::simnet::{Env, Message, Node, Step, Tick, WordCost};
use crate::validity::{ProcessId, Value};

/// Something a broadcast carries.
pub trait Payload: Clone + Debug + Ord {
    fn cost(&self) -> WordCost;
}

impl Payload for Value {
    fn cost(&self) -> WordCost {
        WordCost::values(1)
    }
}

/// Best-effort broadcast: one envelope per process, self included, no guarantee if the
/// sender is faulty.
pub fn beb<M, T, O>(step: &mut Step<M, T, O>, m: M) {
    step.broadcast(m);
}

/// Echo quorum: `ceil((n + t + 1) / 2)`.
pub fn echo_threshold(n: usize, t: usize) -> usize {
    (n + t + 1).div_ceil(2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BrbMsg<V> {
    Send(V),
    Echo(ProcessId, V),
    Ready(ProcessId, V),
}

impl<V: Payload> Message for BrbMsg<V> {
    fn tag(&self) -> &'static str {
        match self {
            BrbMsg::Send(_) => "SEND",
            BrbMsg::Echo(..) => "ECHO",
            BrbMsg::Ready(..) => "READY",
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            BrbMsg::Send(v) | BrbMsg::Echo(_, v) | BrbMsg::Ready(_, v) => v.cost(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BrbPhase {
    Init,
    Echoed,
    Readied,
    Delivered,
}

/// State of one sender's broadcast instance.
#[derive(Clone, Debug)]
pub struct BrbInstance<V> {
    pub echoed: bool,
    pub readied: bool,
    pub delivered: bool,
    echo_voters: BTreeSet<ProcessId>,
    ready_voters: BTreeSet<ProcessId>,
    echoes: BTreeMap<V, usize>,
    readies: BTreeMap<V, usize>,
}

impl<V> Default for BrbInstance<V> {
    fn default() -> Self {
        BrbInstance {
            echoed: false,
            readied: false,
            delivered: false,
            echo_voters: BTreeSet::new(),
            ready_voters: BTreeSet::new(),
            echoes: BTreeMap::new(),
            readies: BTreeMap::new(),
        }
    }
}

impl<V> BrbInstance<V> {
    pub fn phase(&self) -> BrbPhase {
        if self.delivered {
            BrbPhase::Delivered
        } else if self.readied {
            BrbPhase::Readied
        } else if self.echoed {
            BrbPhase::Echoed
        } else {
            BrbPhase::Init
        }
    }
}

/// Bracha's reliable broadcast, one instance per sender. Outputs `(sender, value)`.
#[derive(Clone, Debug)]
pub struct Brb<V> {
    n: usize,
    t: usize,
    instances: BTreeMap<ProcessId, BrbInstance<V>>,
}

pub type BrbStep<V> = Step<BrbMsg<V>, (), (ProcessId, V)>;

impl<V: Payload> Brb<V> {
    pub fn new(n: usize, t: usize) -> Self {
        Brb { n, t, instances: BTreeMap::new() }
    }

    pub fn instance(&self, sender: ProcessId) -> Option<&BrbInstance<V>> {
        self.instances.get(&sender)
    }

    pub fn broadcast(&mut self, v: V) -> BrbStep<V> {
        let mut s = Step::new();
        s.broadcast(BrbMsg::Send(v));
        s
    }

    pub fn handle(&mut self, from: ProcessId, msg: BrbMsg<V>) -> BrbStep<V> {
        let mut s = Step::new();
        let (n, t) = (self.n, self.t);
        match msg {
            BrbMsg::Send(v) => {
                let inst = self.instances.entry(from).or_default();
                if !inst.echoed {
                    inst.echoed = true;
                    s.broadcast(BrbMsg::Echo(from, v));
                }
            }
            BrbMsg::Echo(origin, v) => {
                let inst = self.instances.entry(origin).or_default();
                if !inst.echo_voters.insert(from) {
                    return s;
                }
                let c = inst.echoes.entry(v.clone()).or_default();
                *c += 1;
                if *c >= echo_threshold(n, t) && !inst.readied {
                    inst.readied = true;
                    s.broadcast(BrbMsg::Ready(origin, v));
                }
            }
            BrbMsg::Ready(origin, v) => {
                let inst = self.instances.entry(origin).or_default();
                if !inst.ready_voters.insert(from) {
                    return s;
                }
                let c = inst.readies.entry(v.clone()).or_default();
                *c += 1;
                let c = *c;
                if c > t && !inst.readied {
                    inst.readied = true;
                    s.broadcast(BrbMsg::Ready(origin, v.clone()));
                }
                if c > 2 * t && !inst.delivered {
                    inst.delivered = true;
                    s.output((origin, v));
                }
            }
        }
        s
    }
}

/// Timer of a slow broadcast: the next send is due.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlowTick;

/// Sends one payload to `P1..Pn` in index order, waiting `delta * n^(i-1)` ticks after
/// each send, where `i` is the sender's index.
#[derive(Clone, Debug)]
pub struct SlowBroadcast<V> {
    gap: Tick,
    payload: Option<V>,
    queue: VecDeque<ProcessId>,
}

/// Gap between consecutive sends of process `i`.
pub fn slow_gap(delta: Tick, n: usize, i: ProcessId) -> Tick {
    delta.saturating_mul((n as u64).saturating_pow(i.0 - 1))
}

impl<V: Clone> SlowBroadcast<V> {
    pub fn new(env: &Env) -> Self {
        SlowBroadcast { gap: slow_gap(env.delta, env.params.n(), env.me), payload: None, queue: VecDeque::new() }
    }

    pub fn gap(&self) -> Tick {
        self.gap
    }

    pub fn broadcast(&mut self, env: &Env, v: V) -> Step<V, SlowTick, ()> {
        self.payload = Some(v);
        self.queue = ProcessId::all(env.params.n()).collect();
        self.next()
    }

    pub fn on_tick(&mut self) -> Step<V, SlowTick, ()> {
        self.next()
    }

    /// Abandons the remaining sends.
    pub fn stop(&mut self) {
        self.queue.clear();
    }

    pub fn is_active(&self) -> bool {
        !self.queue.is_empty()
    }

    fn next(&mut self) -> Step<V, SlowTick, ()> {
        let mut s = Step::new();
        if let (Some(to), Some(v)) = (self.queue.pop_front(), self.payload.as_ref()) {
            s.send(to, v.clone());
            if !self.queue.is_empty() {
                s.timer(self.gap, SlowTick);
            }
        }
        s
    }
}

/// Standalone reliable-broadcast process, for tests and experiments: broadcasts its value
/// at start if it is a designated sender, outputs every delivery.
pub struct BrbNode {
    brb: Brb<Value>,
    initial: Option<Value>,
}

impl BrbNode {
    pub fn new(n: usize, t: usize, initial: Option<Value>) -> Self {
        BrbNode { brb: Brb::new(n, t), initial }
    }
}

impl Node for BrbNode {
    type Msg = BrbMsg<Value>;
    type Timer = ();
    type Output = (ProcessId, Value);

    fn start(&mut self, _: &Env) -> BrbStep<Value> {
        match self.initial {
            Some(v) => self.brb.broadcast(v),
            None => Step::new(),
        }
    }

    fn on_message(&mut self, _: &Env, from: ProcessId, msg: BrbMsg<Value>) -> BrbStep<Value> {
        self.brb.handle(from, msg)
    }

    fn on_timer(&mut self, _: &Env, _: ()) -> BrbStep<Value> {
        Step::new()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlowMsg(pub Value);

impl Message for SlowMsg {
    fn tag(&self) -> &'static str {
        "SLOW_BROADCAST"
    }

    fn cost(&self) -> WordCost {
        WordCost::values(1)
    }
}

/// Standalone slow-broadcast process: slow-broadcasts its value at start and outputs
/// `(sender, value)` per delivery.
pub struct SlowNode {
    slow: Option<SlowBroadcast<Value>>,
    v: Value,
}

impl SlowNode {
    pub fn new(v: Value) -> Self {
        SlowNode { slow: None, v }
    }
}

impl Node for SlowNode {
    type Msg = SlowMsg;
    type Timer = SlowTick;
    type Output = (ProcessId, Value);

    fn start(&mut self, env: &Env) -> Step<SlowMsg, SlowTick, (ProcessId, Value)> {
        let mut slow = SlowBroadcast::new(env);
        let step = slow.broadcast(env, self.v);
        self.slow = Some(slow);
        step.lift(SlowMsg, |t| t).0
    }

    fn on_message(&mut self, _: &Env, from: ProcessId, m: SlowMsg) -> Step<SlowMsg, SlowTick, (ProcessId, Value)> {
        let mut s = Step::new();
        s.output((from, m.0));
        s
    }

    fn on_timer(&mut self, _: &Env, _: SlowTick) -> Step<SlowMsg, SlowTick, (ProcessId, Value)> {
        match self.slow.as_mut() {
            Some(slow) => slow.on_tick().lift(SlowMsg, |t| t).0,
            None => Step::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::{make_adversary, AdversaryKind, NetworkParams, Schedule, Simulation};
    use crate::validity::{SystemParams, ValueSpace};

    #[test]
    fn echo_threshold_values() {
        assert_eq!(echo_threshold(4, 1), 3);
        assert_eq!(echo_threshold(7, 2), 5);
        assert_eq!(echo_threshold(10, 3), 7);
    }

    #[test]
    fn brb_correct_sender_delivers_within_three_hops() {
        let params = SystemParams::new(4, 1).unwrap();
        let adv = make_adversary(&AdversaryKind::None, params, 0).unwrap();
        let nodes = adv.build(params, &ValueSpace::binary(), &[Value(1); 4], |p, v| {
            BrbNode::new(4, 1, (p == ProcessId(1)).then_some(v))
        });
        let tr = Simulation::new(params, NetworkParams::new(0, 1, 0), Schedule::Synchronous, nodes, adv.faulty, 50).run();
        for p in params.processes() {
            let (out, t) = tr.decision(p).unwrap();
            assert_eq!(*out, (ProcessId(1), Value(1)));
            assert!(t <= 3);
        }
    }

    #[test]
    fn slow_broadcast_send_times() {
        let params = SystemParams::new(4, 1).unwrap();
        let adv = make_adversary(&AdversaryKind::None, params, 0).unwrap();
        let nodes = adv.build(params, &ValueSpace::binary(), &[Value(0); 4], |_, v| SlowNode::new(v));
        let tr = Simulation::new(params, NetworkParams::new(0, 1, 0), Schedule::Synchronous, nodes, adv.faulty, 200).run();
        let times = |i: u32| -> Vec<(u32, Tick)> {
            tr.envelopes.iter().filter(|e| e.sender == ProcessId(i)).map(|e| (e.receiver.0, e.send_time)).collect()
        };
        assert_eq!(times(1), vec![(1, 0), (2, 1), (3, 2), (4, 3)]);
        assert_eq!(times(2), vec![(1, 0), (2, 4), (3, 8), (4, 12)]);
        assert_eq!(times(3).last(), Some(&(4, 48)));
        assert_eq!(times(4).last(), Some(&(4, 192)));
        assert_eq!(slow_gap(1, 16, ProcessId(16)), 16u64.pow(15));
        assert_eq!(slow_gap(1, 17, ProcessId(17)), u64::MAX);
    }
}
