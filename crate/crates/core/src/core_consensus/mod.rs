//! Provable consensus over value-proof pairs, and binary consensus.

mod binary;
mod dbft;
mod quad;

pub use binary::{
    verify_signed_bit, BinaryBackend, BinaryConsensus, BinaryMsg, BinaryStep, BinaryTimer, ProvableBinary,
    ProvableBinaryMsg, SignedBit,
};
pub use dbft::{Dbft, DbftMsg, DbftTimer};
pub use quad::{leader, Phase, ProvablePair, Quad, QuadMsg, QuadStep, QuadTimeout, QuorumCertificate, Verify};

use crate::crypto::{hash, Digest, Keyring};
use crate::simnet::{Env, Node, Step, Tick, WordCost};
use crate::validity::{ProcessId, Value};

/// First view timeout: ten message delays.
pub fn default_base_timeout(delta: Tick) -> Tick {
    delta.saturating_mul(10)
}

impl ProvablePair for Value {
    fn digest(&self) -> Digest {
        hash(&self.0.to_be_bytes())
    }

    fn cost(&self) -> WordCost {
        WordCost::values(1)
    }
}

/// Standalone provable-consensus process: proposes its pair at start, halts after
/// deciding.
pub struct QuadNode<P> {
    quad: Quad<P>,
    initial: Option<P>,
}

impl<P: ProvablePair> QuadNode<P> {
    pub fn new(quad: Quad<P>, initial: Option<P>) -> Self {
        QuadNode { quad, initial }
    }

    fn finish(&self, mut s: QuadStep<P>) -> QuadStep<P> {
        if self.quad.decided().is_some() {
            s.halt = true;
        }
        s
    }
}

impl<P: ProvablePair + 'static> Node for QuadNode<P> {
    type Msg = QuadMsg<P>;
    type Timer = QuadTimeout;
    type Output = P;

    fn start(&mut self, env: &Env) -> QuadStep<P> {
        let mut s = self.quad.start(env);
        if let Some(p) = self.initial.take() {
            s.extend(self.quad.propose(env, p));
        }
        self.finish(s)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: QuadMsg<P>) -> QuadStep<P> {
        let s = self.quad.handle(env, from, msg);
        self.finish(s)
    }

    fn on_timer(&mut self, env: &Env, timer: QuadTimeout) -> QuadStep<P> {
        let s = self.quad.on_timer(env, timer);
        self.finish(s)
    }
}

/// Standalone binary-consensus process. Outputs its decided bit as a [`Value`].
pub struct BinaryNode {
    inner: BinaryConsensus,
    bit: u8,
}

impl BinaryNode {
    pub fn new(inner: BinaryConsensus, bit: u8) -> Self {
        BinaryNode { inner, bit }
    }

    pub fn build(backend: BinaryBackend, me: ProcessId, n: usize, t: usize, delta: Tick, keyring: &Keyring, bit: u8) -> Self {
        BinaryNode::new(BinaryConsensus::new(backend, me, n, t, delta, keyring, 0), bit)
    }

    fn finish(&self, s: BinaryStep) -> Step<BinaryMsg, BinaryTimer, Value> {
        let (mut out, bits) = s.lift(|m| m, |t| t);
        out.outputs = bits.into_iter().map(|b| Value(b as i64)).collect();
        out.halt = self.inner.is_finished();
        out
    }
}

impl Node for BinaryNode {
    type Msg = BinaryMsg;
    type Timer = BinaryTimer;
    type Output = Value;

    fn start(&mut self, env: &Env) -> Step<BinaryMsg, BinaryTimer, Value> {
        let mut s = self.inner.start(env);
        s.extend(self.inner.propose(env, self.bit));
        self.finish(s)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: BinaryMsg) -> Step<BinaryMsg, BinaryTimer, Value> {
        let s = self.inner.handle(env, from, msg);
        self.finish(s)
    }

    fn on_timer(&mut self, env: &Env, timer: BinaryTimer) -> Step<BinaryMsg, BinaryTimer, Value> {
        let s = self.inner.on_timer(env, timer);
        self.finish(s)
    }
}

#[cfg(test)]
mod tests;
