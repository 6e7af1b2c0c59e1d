use std::collections::BTreeMap;
use std::rc::Rc;

use serde_json::json;

use super::{vector_json, SignedProposal, SignedVector, VectorContext};
use crate::core_consensus::{default_base_timeout, Quad, QuadMsg, QuadStep, QuadTimeout};
use crate::simnet::{Env, Message, Node, Step, WordCost};
use crate::validity::{InputConfiguration, ProcessId, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum AuthMsg {
    Proposal(SignedProposal),
    Quad(QuadMsg<SignedVector>),
}

impl Message for AuthMsg {
    fn tag(&self) -> &'static str {
        match self {
            AuthMsg::Proposal(_) => "PROPOSAL",
            AuthMsg::Quad(m) => m.tag(),
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            AuthMsg::Proposal(p) => p.cost(),
            AuthMsg::Quad(m) => m.cost(),
        }
    }
}

type AuthStep = Step<AuthMsg, QuadTimeout, InputConfiguration>;

/// Signed-proposal vector consensus. The first `n - t` valid proposals received form a
/// vector; the vector and its signatures go to provable consensus, whose predicate demands
/// a signed proposal behind every pair.
pub struct AuthVector {
    ctx: VectorContext,
    proposal: Value,
    received: BTreeMap<ProcessId, SignedProposal>,
    quad: Quad<SignedVector>,
    decided: bool,
}

impl AuthVector {
    pub fn new(ctx: VectorContext, me: ProcessId, proposal: Value) -> Self {
        let check = ctx.clone();
        let verify = Rc::new(move |sv: &SignedVector| check.valid_signed_vector(sv));
        let quad = Quad::new(me, ctx.n(), ctx.t(), ctx.keyring.clone(), verify, 0, default_base_timeout(ctx.delta));
        AuthVector { ctx, proposal, received: BTreeMap::new(), quad, decided: false }
    }

    fn lift(&mut self, s: QuadStep<SignedVector>) -> AuthStep {
        let (mut out, decided) = s.lift(AuthMsg::Quad, |t| t);
        if let Some(sv) = decided.into_iter().next() {
            if !self.decided {
                self.decided = true;
                out.note("vector_decide", json!({ "vector": vector_json(&sv.vector) }));
                out.output(sv.vector);
                out.halt = true;
            }
        }
        out
    }
}

impl Node for AuthVector {
    type Msg = AuthMsg;
    type Timer = QuadTimeout;
    type Output = InputConfiguration;

    fn start(&mut self, env: &Env) -> AuthStep {
        let quad = self.quad.start(env);
        let mut s = self.lift(quad);
        s.broadcast(AuthMsg::Proposal(SignedProposal::sign(&self.ctx.keyring, env.me, self.proposal)));
        s
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: AuthMsg) -> AuthStep {
        match msg {
            AuthMsg::Proposal(sp) => {
                let quorum = self.ctx.quorum();
                if self.received.len() >= quorum || self.received.contains_key(&from) || !self.ctx.valid_proposal(from, &sp) {
                    return Step::new();
                }
                self.received.insert(from, sp);
                if self.received.len() < quorum {
                    return Step::new();
                }
                let sv = SignedVector::from_proposals(self.received.values());
                let mut s = Step::new();
                s.note("vector_formed", json!({ "vector": vector_json(&sv.vector) }));
                let quad = self.quad.propose(env, sv);
                s.extend(self.lift(quad));
                s
            }
            AuthMsg::Quad(m) => {
                let quad = self.quad.handle(env, from, m);
                self.lift(quad)
            }
        }
    }

    fn on_timer(&mut self, env: &Env, timer: QuadTimeout) -> AuthStep {
        let quad = self.quad.on_timer(env, timer);
        self.lift(quad)
    }
}
