use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::{vector_digest, SignedVector, VectorContext};
use crate::broadcast::{SlowBroadcast, SlowTick};
use crate::crypto::{Digest, PartialSignature, ThresholdSignature};
use crate::simnet::{Env, Message, Node, Step, WordCost};
use crate::validity::{InputConfiguration, ProcessId};

#[derive(Clone, Debug, PartialEq)]
pub enum DisseminationMsg {
    Slow(SignedVector),
    Stored { digest: Digest, part: PartialSignature },
    Confirm { digest: Digest, tsig: ThresholdSignature },
}

impl Message for DisseminationMsg {
    fn tag(&self) -> &'static str {
        match self {
            DisseminationMsg::Slow(_) => "SLOW_BROADCAST",
            DisseminationMsg::Stored { .. } => "STORED",
            DisseminationMsg::Confirm { .. } => "CONFIRM",
        }
    }

    fn cost(&self) -> WordCost {
        use crate::core_consensus::ProvablePair;
        match self {
            DisseminationMsg::Slow(sv) => sv.cost(),
            DisseminationMsg::Stored { .. } => WordCost::digests(1) + WordCost::signatures(1),
            DisseminationMsg::Confirm { .. } => WordCost::digests(1) + WordCost::tsigs(1),
        }
    }
}

pub type DisseminationStep = Step<DisseminationMsg, SlowTick, (Digest, ThresholdSignature)>;

/// Vector dissemination. Each process slow-broadcasts its signed vector; receivers check
/// the signatures, cache the vector and acknowledge it with a partial signature on its
/// hash. `n - t` acknowledgements make a threshold signature, announced with CONFIRM. A
/// valid CONFIRM is rebroadcast once and acquired, after which the process stops taking
/// part.
pub struct Disseminator {
    ctx: VectorContext,
    me: ProcessId,
    own: Option<Digest>,
    slow: Option<SlowBroadcast<SignedVector>>,
    cache: BTreeMap<Digest, InputConfiguration>,
    disseminated: BTreeSet<ProcessId>,
    stored: BTreeMap<ProcessId, PartialSignature>,
    confirmed: bool,
    acquired: Option<(Digest, ThresholdSignature)>,
}

impl Disseminator {
    pub fn new(ctx: VectorContext, me: ProcessId) -> Self {
        Disseminator {
            ctx,
            me,
            own: None,
            slow: None,
            cache: BTreeMap::new(),
            disseminated: BTreeSet::new(),
            stored: BTreeMap::new(),
            confirmed: false,
            acquired: None,
        }
    }

    pub fn participating(&self) -> bool {
        self.acquired.is_none()
    }

    pub fn acquired(&self) -> Option<&(Digest, ThresholdSignature)> {
        self.acquired.as_ref()
    }

    pub fn cached(&self, d: &Digest) -> Option<&InputConfiguration> {
        self.cache.get(d)
    }

    pub fn disseminate(&mut self, env: &Env, sv: SignedVector) -> DisseminationStep {
        if self.own.is_some() || !self.participating() {
            return Step::new();
        }
        let d = vector_digest(&sv.vector);
        self.own = Some(d);
        let mut s = Step::new();
        s.note("disseminate", json!({ "digest": d.to_hex() }));
        let mut slow = SlowBroadcast::new(env);
        let (sends, _) = slow.broadcast(env, sv).lift(DisseminationMsg::Slow, |t| t);
        self.slow = Some(slow);
        s.extend(sends);
        s
    }

    pub fn on_tick(&mut self) -> DisseminationStep {
        match self.slow.as_mut() {
            Some(slow) if self.acquired.is_none() => slow.on_tick().lift(DisseminationMsg::Slow, |t| t).0,
            _ => Step::new(),
        }
    }

    pub fn handle(&mut self, from: ProcessId, msg: DisseminationMsg) -> DisseminationStep {
        let mut s = Step::new();
        if !self.participating() {
            return s;
        }
        match msg {
            DisseminationMsg::Slow(sv) => {
                if self.disseminated.contains(&from) || !self.ctx.valid_signed_vector(&sv) {
                    return s;
                }
                self.disseminated.insert(from);
                let d = vector_digest(&sv.vector);
                s.note("cache", json!({ "digest": d.to_hex(), "from": from.0 }));
                self.cache.insert(d, sv.vector);
                let part = self.ctx.keyring.sign_partial(self.me, d);
                s.send(from, DisseminationMsg::Stored { digest: d, part });
            }
            DisseminationMsg::Stored { digest, part } => {
                if self.own != Some(digest) || self.confirmed || part.digest != digest || part.signer() != from {
                    return s;
                }
                if self.stored.contains_key(&from) || !self.ctx.keyring.verify_partial(&part) {
                    return s;
                }
                self.stored.insert(from, part);
                if self.stored.len() >= self.ctx.quorum() {
                    let parts: Vec<PartialSignature> = self.stored.values().copied().collect();
                    if let Ok(tsig) = self.ctx.keyring.combine(&parts) {
                        self.confirmed = true;
                        s.broadcast(DisseminationMsg::Confirm { digest, tsig });
                    }
                }
            }
            DisseminationMsg::Confirm { digest, tsig } => {
                if !self.ctx.keyring.verify_threshold(&digest, &tsig) {
                    return s;
                }
                s.broadcast(DisseminationMsg::Confirm { digest, tsig: tsig.clone() });
                s.note("acquire", json!({ "digest": digest.to_hex() }));
                s.output((digest, tsig.clone()));
                self.acquired = Some((digest, tsig));
                if let Some(slow) = self.slow.as_mut() {
                    slow.stop();
                }
            }
        }
        s
    }
}

/// Standalone dissemination process: disseminates a given signed vector at start and halts
/// once it acquires.
pub struct DisseminationNode {
    inner: Disseminator,
    vector: Option<SignedVector>,
}

impl DisseminationNode {
    pub fn new(ctx: VectorContext, me: ProcessId, vector: SignedVector) -> Self {
        DisseminationNode { inner: Disseminator::new(ctx, me), vector: Some(vector) }
    }

    fn finish(&self, s: DisseminationStep) -> Step<DisseminationMsg, SlowTick, Digest> {
        let (mut out, acquired) = s.lift(|m| m, |t| t);
        out.outputs = acquired.into_iter().map(|(d, _)| d).collect();
        out.halt = !self.inner.participating();
        out
    }
}

impl Node for DisseminationNode {
    type Msg = DisseminationMsg;
    type Timer = SlowTick;
    /// The acquired digest.
    type Output = Digest;

    fn start(&mut self, env: &Env) -> Step<DisseminationMsg, SlowTick, Digest> {
        let s = match self.vector.take() {
            Some(sv) => self.inner.disseminate(env, sv),
            None => Step::new(),
        };
        self.finish(s)
    }

    fn on_message(&mut self, _: &Env, from: ProcessId, msg: DisseminationMsg) -> Step<DisseminationMsg, SlowTick, Digest> {
        let s = self.inner.handle(from, msg);
        self.finish(s)
    }

    fn on_timer(&mut self, _: &Env, _: SlowTick) -> Step<DisseminationMsg, SlowTick, Digest> {
        let s = self.inner.on_tick();
        self.finish(s)
    }
}
