use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::node::{BoxedNode, Env, Message, Step, Target, Tick};
use super::schedule::{NetworkParams, Schedule};
use super::trace::{EnvelopeRecord, Event, EventKind, Trace};
use crate::validity::{ProcessId, SystemParams};

enum Pending<M, T> {
    Start,
    Deliver(usize, M),
    Timer(T),
}

/// One deterministic execution: every process starts at tick 0, events are processed in
/// `(time, process index, sequence number)` order, and the run ends when every correct
/// process has halted, nothing is pending, or the next event lies beyond `max_ticks`.
pub struct Simulation<M, T, O> {
    params: SystemParams,
    net: NetworkParams,
    schedule: Schedule,
    nodes: Vec<BoxedNode<M, T, O>>,
    faulty: BTreeSet<ProcessId>,
    max_ticks: Tick,
}

impl<M: Message, T: Clone + std::fmt::Debug + PartialEq, O: Clone + std::fmt::Debug> Simulation<M, T, O> {
    /// `nodes[i]` runs process `P(i+1)`.
    pub fn new(
        params: SystemParams,
        net: NetworkParams,
        schedule: Schedule,
        nodes: Vec<BoxedNode<M, T, O>>,
        faulty: BTreeSet<ProcessId>,
        max_ticks: Tick,
    ) -> Self {
        assert_eq!(nodes.len(), params.n(), "one node per process");
        Simulation { params, net, schedule, nodes, faulty, max_ticks }
    }

    pub fn run(mut self) -> Trace<O> {
        let n = self.params.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.net.seed);
        let mut queue: BTreeMap<(Tick, u32, u64), Pending<M, T>> = BTreeMap::new();
        let mut seq: u64 = 0;
        let mut trace = Trace {
            params: self.params,
            gst: self.net.gst,
            delta: self.net.delta,
            max_ticks: self.max_ticks,
            faulty: self.faulty.clone(),
            events: Vec::new(),
            envelopes: Vec::new(),
            outputs: Vec::new(),
            halted: vec![false; n],
            end_time: 0,
        };
        for p in self.params.processes() {
            queue.insert((0, p.0, seq), Pending::Start);
            seq += 1;
        }
        let mut correct_running = self.params.processes().filter(|p| !self.faulty.contains(p)).count();

        while let Some(((now, pid, _), pending)) = queue.pop_first() {
            if now > self.max_ticks {
                break;
            }
            let me = ProcessId(pid);
            if trace.halted[me.index()] {
                continue;
            }
            trace.end_time = now;
            let env = Env { me, now, params: self.params, delta: self.net.delta };
            let node = &mut self.nodes[me.index()];
            let step = match pending {
                Pending::Start => {
                    trace.events.push(Event { t: now, proc: me, kind: EventKind::Start });
                    node.start(&env)
                }
                Pending::Deliver(k, msg) => {
                    trace.events.push(Event { t: now, proc: me, kind: EventKind::Deliver(k) });
                    let from = trace.envelopes[k].sender;
                    node.on_message(&env, from, msg)
                }
                Pending::Timer(t) => {
                    trace.events.push(Event { t: now, proc: me, kind: EventKind::Timer });
                    node.on_timer(&env, t)
                }
            };
            let halted = self.apply(&env, step, &mut trace, &mut queue, &mut seq, &mut rng);
            if halted && !self.faulty.contains(&me) {
                correct_running -= 1;
                if correct_running == 0 {
                    break;
                }
            }
        }
        trace
    }

    fn apply(
        &self,
        env: &Env,
        step: Step<M, T, O>,
        trace: &mut Trace<O>,
        queue: &mut BTreeMap<(Tick, u32, u64), Pending<M, T>>,
        seq: &mut u64,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        let (me, now) = (env.me, env.now);
        for note in step.notes {
            trace.events.push(Event { t: now, proc: me, kind: EventKind::Note { kind: note.kind, detail: note.detail } });
        }
        for o in step.outputs {
            trace.outputs.push((me, now, o));
            trace.events.push(Event { t: now, proc: me, kind: EventKind::Output(trace.outputs.len() - 1) });
        }
        for (target, msg) in step.sends {
            let mut send_one = |to: ProcessId, msg: M| {
                if to.0 == 0 || to.index() >= self.params.n() {
                    return;
                }
                let at = self.schedule.deliver_at(&self.net, now, me, to, rng);
                trace.envelopes.push(EnvelopeRecord {
                    sender: me,
                    receiver: to,
                    tag: msg.tag().to_string(),
                    cost: msg.cost(),
                    send_time: now,
                    deliver_time: at,
                });
                let k = trace.envelopes.len() - 1;
                trace.events.push(Event { t: now, proc: me, kind: EventKind::Send(k) });
                queue.insert((at, to.0, *seq), Pending::Deliver(k, msg));
                *seq += 1;
            };
            match target {
                Target::To(p) => send_one(p, msg),
                Target::All => {
                    for p in self.params.processes() {
                        send_one(p, msg.clone());
                    }
                }
            }
        }
        for (after, t) in step.timers {
            queue.insert((now + after, me.0, *seq), Pending::Timer(t));
            *seq += 1;
        }
        if step.halt {
            trace.halted[me.index()] = true;
            trace.events.push(Event { t: now, proc: me, kind: EventKind::Halt });
        }
        step.halt
    }
}
