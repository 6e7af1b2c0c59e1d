use std::collections::BTreeMap;
use std::rc::Rc;

use serde_json::json;

use super::add::{Add, AddShare, AddStep};
use super::dissemination::{DisseminationMsg, DisseminationStep, Disseminator};
use super::{vector_json, SignedProposal, SignedVector, VectorContext};
use crate::broadcast::SlowTick;
use crate::core_consensus::{default_base_timeout, ProvablePair, Quad, QuadMsg, QuadStep, QuadTimeout};
use crate::crypto::{Digest, ThresholdSignature};
use crate::simnet::{Env, Message, Node, Step, WordCost};
use crate::validity::{InputConfiguration, ProcessId, Value};

/// A vector digest with the threshold signature of `n - t` processes that cached a
/// preimage.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedDigest {
    pub digest: Digest,
    pub tsig: ThresholdSignature,
}

impl ProvablePair for CertifiedDigest {
    fn digest(&self) -> Digest {
        self.digest
    }

    fn cost(&self) -> WordCost {
        WordCost::digests(1) + WordCost::tsigs(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LowCommMsg {
    Proposal(SignedProposal),
    Dissemination(DisseminationMsg),
    Quad(QuadMsg<CertifiedDigest>),
    Add(AddShare),
}

impl Message for LowCommMsg {
    fn tag(&self) -> &'static str {
        match self {
            LowCommMsg::Proposal(_) => "PROPOSAL",
            LowCommMsg::Dissemination(m) => m.tag(),
            LowCommMsg::Quad(m) => m.tag(),
            LowCommMsg::Add(m) => m.tag(),
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            LowCommMsg::Proposal(p) => p.cost(),
            LowCommMsg::Dissemination(m) => m.cost(),
            LowCommMsg::Quad(m) => m.cost(),
            LowCommMsg::Add(m) => m.cost(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowCommTimer {
    Slow(SlowTick),
    Quad(QuadTimeout),
}

type LowCommStep = Step<LowCommMsg, LowCommTimer, InputConfiguration>;

/// Vector consensus with low communication: signed proposals, vector dissemination of the
/// first `n - t` of them, provable consensus on a certified digest, and data dissemination
/// of the decided digest's preimage, which at least `t + 1` correct processes cached.
pub struct LowCommVector {
    ctx: VectorContext,
    proposal: Value,
    received: BTreeMap<ProcessId, SignedProposal>,
    dissemination: Disseminator,
    quad: Quad<CertifiedDigest>,
    proposed_quad: bool,
    add: Add,
    decided: bool,
}

impl LowCommVector {
    pub fn new(ctx: VectorContext, me: ProcessId, proposal: Value) -> Self {
        let ring = ctx.keyring.clone();
        let verify = Rc::new(move |p: &CertifiedDigest| ring.verify_threshold(&p.digest, &p.tsig));
        let quad = Quad::new(me, ctx.n(), ctx.t(), ctx.keyring.clone(), verify, 0, default_base_timeout(ctx.delta));
        LowCommVector {
            dissemination: Disseminator::new(ctx.clone(), me),
            ctx,
            proposal,
            received: BTreeMap::new(),
            quad,
            proposed_quad: false,
            add: Add::new(),
            decided: false,
        }
    }

    fn on_dissemination(&mut self, env: &Env, s: DisseminationStep, out: &mut LowCommStep) {
        let (step, acquired) = s.lift(LowCommMsg::Dissemination, LowCommTimer::Slow);
        out.extend(step);
        for (digest, tsig) in acquired {
            if !self.proposed_quad {
                self.proposed_quad = true;
                let q = self.quad.propose(env, CertifiedDigest { digest, tsig });
                self.on_quad(q, out);
            }
        }
    }

    fn on_quad(&mut self, s: QuadStep<CertifiedDigest>, out: &mut LowCommStep) {
        let (step, decided) = s.lift(LowCommMsg::Quad, LowCommTimer::Quad);
        out.extend(step);
        for cd in decided {
            let held = self.dissemination.cached(&cd.digest).cloned();
            let a = self.add.input(held, cd.digest);
            self.on_add(a, out);
        }
    }

    fn on_add(&mut self, s: AddStep, out: &mut LowCommStep) {
        let (step, outputs) = s.lift(LowCommMsg::Add, |_| unreachable!("data dissemination sets no timers"));
        out.extend(step);
        if let Some(v) = outputs.into_iter().next() {
            if !self.decided {
                self.decided = true;
                out.note("vector_decide", json!({ "vector": vector_json(&v) }));
                out.output(v);
                out.halt = true;
            }
        }
    }
}

impl Node for LowCommVector {
    type Msg = LowCommMsg;
    type Timer = LowCommTimer;
    type Output = InputConfiguration;

    fn start(&mut self, env: &Env) -> LowCommStep {
        let mut out = Step::new();
        let q = self.quad.start(env);
        self.on_quad(q, &mut out);
        out.broadcast(LowCommMsg::Proposal(SignedProposal::sign(&self.ctx.keyring, env.me, self.proposal)));
        out
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: LowCommMsg) -> LowCommStep {
        let mut out = Step::new();
        match msg {
            LowCommMsg::Proposal(sp) => {
                let quorum = self.ctx.quorum();
                if self.received.len() >= quorum || self.received.contains_key(&from) || !self.ctx.valid_proposal(from, &sp) {
                    return out;
                }
                self.received.insert(from, sp);
                if self.received.len() == quorum {
                    let sv = SignedVector::from_proposals(self.received.values());
                    let d = self.dissemination.disseminate(env, sv);
                    self.on_dissemination(env, d, &mut out);
                }
            }
            LowCommMsg::Dissemination(m) => {
                let d = self.dissemination.handle(from, m);
                self.on_dissemination(env, d, &mut out);
            }
            LowCommMsg::Quad(m) => {
                let q = self.quad.handle(env, from, m);
                self.on_quad(q, &mut out);
            }
            LowCommMsg::Add(m) => {
                let a = self.add.handle(from, m);
                self.on_add(a, &mut out);
            }
        }
        out
    }

    fn on_timer(&mut self, env: &Env, timer: LowCommTimer) -> LowCommStep {
        let mut out = Step::new();
        match timer {
            LowCommTimer::Slow(_) => {
                let d = self.dissemination.on_tick();
                self.on_dissemination(env, d, &mut out);
            }
            LowCommTimer::Quad(t) => {
                let q = self.quad.on_timer(env, t);
                self.on_quad(q, &mut out);
            }
        }
        out
    }
}
