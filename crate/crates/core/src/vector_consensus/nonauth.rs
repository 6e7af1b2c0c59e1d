use std::collections::BTreeMap;

use serde_json::json;

use super::{vector_json, VectorContext};
use crate::broadcast::{Brb, BrbMsg, BrbStep};
use crate::core_consensus::{BinaryConsensus, BinaryMsg, BinaryStep, BinaryTimer};
use crate::simnet::{Env, Message, Node, Step, WordCost};
use crate::validity::{InputConfiguration, ProcessId, Value};

/// Binary instances are numbered by the process whose proposal they decide on.
#[derive(Clone, Debug, PartialEq)]
pub enum NonAuthMsg {
    Brb(BrbMsg<Value>),
    Bin(ProcessId, BinaryMsg),
}

impl Message for NonAuthMsg {
    fn tag(&self) -> &'static str {
        match self {
            NonAuthMsg::Brb(m) => m.tag(),
            NonAuthMsg::Bin(_, m) => m.tag(),
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            NonAuthMsg::Brb(m) => m.cost(),
            NonAuthMsg::Bin(_, m) => m.cost() + WordCost::values(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonAuthTimer(pub ProcessId, pub BinaryTimer);

type NonAuthStep = Step<NonAuthMsg, NonAuthTimer, InputConfiguration>;

/// Signature-free vector consensus: reliable broadcast of proposals, then one binary
/// consensus per process on whether its proposal enters the vector.
///
/// A delivered proposal makes its instance receive 1 while the process is still proposing;
/// once `n - t` instances decided 1, every remaining instance receives 0. The vector holds
/// the proposals of the `n - t` lowest-index processes whose instances decided 1.
pub struct NonAuthVector {
    ctx: VectorContext,
    proposal: Value,
    brb: Brb<Value>,
    proposals: BTreeMap<ProcessId, Value>,
    proposing: bool,
    bins: Vec<BinaryConsensus>,
    ones: usize,
    decided: bool,
}

impl NonAuthVector {
    pub fn new(ctx: VectorContext, me: ProcessId, proposal: Value) -> Self {
        let bins = ProcessId::all(ctx.n())
            .map(|j| BinaryConsensus::new(ctx.binary, me, ctx.n(), ctx.t(), ctx.delta, &ctx.keyring, j.0 as u64))
            .collect();
        NonAuthVector {
            brb: Brb::new(ctx.n(), ctx.t()),
            ctx,
            proposal,
            proposals: BTreeMap::new(),
            proposing: true,
            bins,
            ones: 0,
            decided: false,
        }
    }

    fn lift_brb(s: BrbStep<Value>) -> (NonAuthStep, Vec<(ProcessId, Value)>) {
        s.lift(NonAuthMsg::Brb, |_| unreachable!("reliable broadcast sets no timers"))
    }

    fn lift_bin(&mut self, env: &Env, j: ProcessId, s: BinaryStep, out: &mut NonAuthStep) {
        let (step, bits) = s.lift(move |m| NonAuthMsg::Bin(j, m), move |t| NonAuthTimer(j, t));
        out.extend(step);
        for b in bits {
            out.note("instance_decide", json!({ "instance": j.0, "bit": b }));
            if b == 1 {
                self.ones += 1;
                if self.ones >= self.ctx.quorum() && self.proposing {
                    self.proposing = false;
                    for k in ProcessId::all(self.ctx.n()) {
                        if !self.bins[k.index()].has_proposed() {
                            let s = self.bins[k.index()].propose(env, 0);
                            self.lift_bin(env, k, s, out);
                        }
                    }
                }
            }
        }
    }

    fn on_deliver(&mut self, env: &Env, origin: ProcessId, v: Value, out: &mut NonAuthStep) {
        if !self.ctx.space.is_input(v) || origin.0 == 0 || origin.index() >= self.ctx.n() {
            return;
        }
        self.proposals.insert(origin, v);
        if self.proposing && !self.bins[origin.index()].has_proposed() {
            let s = self.bins[origin.index()].propose(env, 1);
            self.lift_bin(env, origin, s, out);
        }
    }

    fn try_decide(&mut self, out: &mut NonAuthStep) {
        if self.decided || self.bins.iter().any(|b| b.decided().is_none()) {
            return;
        }
        let chosen: Vec<ProcessId> = ProcessId::all(self.ctx.n())
            .filter(|j| self.bins[j.index()].decided() == Some(1))
            .take(self.ctx.quorum())
            .collect();
        let Some(pairs) = chosen.iter().map(|j| self.proposals.get(j).map(|v| (*j, *v))).collect::<Option<Vec<_>>>() else {
            return;
        };
        let vector = InputConfiguration::new(pairs).expect("distinct processes");
        self.decided = true;
        out.note("vector_decide", json!({ "vector": vector_json(&vector) }));
        out.output(vector);
    }

    fn finish(&mut self, mut out: NonAuthStep) -> NonAuthStep {
        self.try_decide(&mut out);
        out.halt = self.decided && self.bins.iter().all(|b| b.is_finished());
        out
    }
}

impl Node for NonAuthVector {
    type Msg = NonAuthMsg;
    type Timer = NonAuthTimer;
    type Output = InputConfiguration;

    fn start(&mut self, env: &Env) -> NonAuthStep {
        let mut out = Step::new();
        for j in ProcessId::all(self.ctx.n()) {
            let s = self.bins[j.index()].start(env);
            self.lift_bin(env, j, s, &mut out);
        }
        let (s, _) = Self::lift_brb(self.brb.broadcast(self.proposal));
        out.extend(s);
        self.finish(out)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: NonAuthMsg) -> NonAuthStep {
        let mut out = Step::new();
        match msg {
            NonAuthMsg::Brb(m) => {
                let (s, delivered) = Self::lift_brb(self.brb.handle(from, m));
                out.extend(s);
                for (origin, v) in delivered {
                    self.on_deliver(env, origin, v, &mut out);
                }
            }
            NonAuthMsg::Bin(j, m) => {
                if j.0 == 0 || j.index() >= self.ctx.n() {
                    return out;
                }
                let s = self.bins[j.index()].handle(env, from, m);
                self.lift_bin(env, j, s, &mut out);
            }
        }
        self.finish(out)
    }

    fn on_timer(&mut self, env: &Env, NonAuthTimer(j, t): NonAuthTimer) -> NonAuthStep {
        let mut out = Step::new();
        let s = self.bins[j.index()].on_timer(env, t);
        self.lift_bin(env, j, s, &mut out);
        self.finish(out)
    }
}
