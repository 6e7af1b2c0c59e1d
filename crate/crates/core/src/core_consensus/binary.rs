use std::collections::BTreeMap;
use std::rc::Rc;

use crate::crypto::{Digest, DigestWriter, Keyring, Signature};
use crate::simnet::{Env, Message, Step, Tick, WordCost};
use crate::validity::ProcessId;

use super::dbft::{Dbft, DbftMsg, DbftTimer};
use super::quad::{ProvablePair, Quad, QuadMsg, QuadTimeout};

/// A bit with `t + 1` signatures of processes that proposed it.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedBit {
    pub bit: u8,
    pub sigs: Vec<Signature>,
}

impl ProvablePair for SignedBit {
    fn digest(&self) -> Digest {
        let mut w = DigestWriter::new("signed-bit");
        w.write_u64(self.bit as u64);
        w.finish()
    }

    fn cost(&self) -> WordCost {
        WordCost::values(1) + WordCost::signatures(self.sigs.len() as u64)
    }
}

fn bit_message(domain: u64, bit: u8) -> [u8; 32] {
    let mut w = DigestWriter::new("binary-proposal");
    w.write_u64(domain).write_u64(bit as u64);
    w.finish().0
}

/// True iff `pair` carries `t + 1` valid signatures from distinct processes on its bit.
pub fn verify_signed_bit(keyring: &Keyring, t: usize, domain: u64, pair: &SignedBit) -> bool {
    if pair.bit > 1 {
        return false;
    }
    let m = bit_message(domain, pair.bit);
    let mut signers: Vec<ProcessId> = pair.sigs.iter().map(|s| s.signer).collect();
    signers.sort();
    signers.dedup();
    signers.len() == pair.sigs.len() && pair.sigs.len() > t && pair.sigs.iter().all(|s| keyring.verify(&m, s))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProvableBinaryMsg {
    Propose { bit: u8, sig: Signature },
    Quad(QuadMsg<SignedBit>),
}

impl Message for ProvableBinaryMsg {
    fn tag(&self) -> &'static str {
        match self {
            ProvableBinaryMsg::Propose { .. } => "BIN_PROPOSE",
            ProvableBinaryMsg::Quad(m) => m.tag(),
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            ProvableBinaryMsg::Propose { .. } => WordCost::values(1) + WordCost::signatures(1),
            ProvableBinaryMsg::Quad(m) => m.cost(),
        }
    }
}

/// Binary consensus on top of provable consensus: processes exchange signed bits and
/// propose the first bit that gathers `t + 1` signatures. A bit no correct process proposed
/// can never gather them.
pub struct ProvableBinary {
    me: ProcessId,
    t: usize,
    domain: u64,
    keyring: Keyring,
    quad: Quad<SignedBit>,
    sigs: [BTreeMap<ProcessId, Signature>; 2],
    proposed: bool,
    handed_over: bool,
}

pub type ProvableBinaryStep = Step<ProvableBinaryMsg, QuadTimeout, u8>;

impl ProvableBinary {
    pub fn new(me: ProcessId, n: usize, t: usize, keyring: Keyring, domain: u64, base_timeout: Tick) -> Self {
        let (kr, dom) = (keyring.clone(), domain);
        let verify = Rc::new(move |p: &SignedBit| verify_signed_bit(&kr, t, dom, p));
        ProvableBinary {
            me,
            t,
            domain,
            quad: Quad::new(me, n, t, keyring.clone(), verify, domain, base_timeout),
            keyring,
            sigs: [BTreeMap::new(), BTreeMap::new()],
            proposed: false,
            handed_over: false,
        }
    }

    pub fn decided(&self) -> Option<u8> {
        self.quad.decided().map(|p| p.bit)
    }

    pub fn has_proposed(&self) -> bool {
        self.proposed
    }

    fn wrap(s: Step<QuadMsg<SignedBit>, QuadTimeout, SignedBit>) -> ProvableBinaryStep {
        let (mut out, decided) = s.lift(ProvableBinaryMsg::Quad, |t| t);
        for p in decided {
            out.output(p.bit);
        }
        out
    }

    pub fn start(&mut self, env: &Env) -> ProvableBinaryStep {
        Self::wrap(self.quad.start(env))
    }

    pub fn propose(&mut self, env: &Env, bit: u8) -> ProvableBinaryStep {
        let mut s = Step::new();
        if self.proposed {
            return s;
        }
        self.proposed = true;
        let bit = bit.min(1);
        let sig = self.keyring.sign(self.me, &bit_message(self.domain, bit));
        s.broadcast(ProvableBinaryMsg::Propose { bit, sig });
        s.extend(self.try_hand_over(env));
        s
    }

    fn try_hand_over(&mut self, env: &Env) -> ProvableBinaryStep {
        if self.handed_over || !self.proposed {
            return Step::new();
        }
        for bit in 0..2u8 {
            let got = &self.sigs[bit as usize];
            if got.len() > self.t {
                self.handed_over = true;
                let pair = SignedBit { bit, sigs: got.values().copied().take(self.t + 1).collect() };
                return Self::wrap(self.quad.propose(env, pair));
            }
        }
        Step::new()
    }

    pub fn handle(&mut self, env: &Env, from: ProcessId, msg: ProvableBinaryMsg) -> ProvableBinaryStep {
        match msg {
            ProvableBinaryMsg::Propose { bit, sig } => {
                if bit <= 1 && sig.signer == from && self.keyring.verify(&bit_message(self.domain, bit), &sig) {
                    self.sigs[bit as usize].entry(from).or_insert(sig);
                }
                self.try_hand_over(env)
            }
            ProvableBinaryMsg::Quad(m) => Self::wrap(self.quad.handle(env, from, m)),
        }
    }

    pub fn on_timer(&mut self, env: &Env, timer: QuadTimeout) -> ProvableBinaryStep {
        Self::wrap(self.quad.on_timer(env, timer))
    }
}

/// Which binary consensus a multi-instance protocol runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryBackend {
    /// Signature-free, round based.
    #[default]
    SignatureFree,
    /// Signed bits decided through provable consensus.
    Provable,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BinaryMsg {
    Free(DbftMsg),
    Provable(ProvableBinaryMsg),
}

impl Message for BinaryMsg {
    fn tag(&self) -> &'static str {
        match self {
            BinaryMsg::Free(m) => m.tag(),
            BinaryMsg::Provable(m) => m.tag(),
        }
    }

    fn cost(&self) -> WordCost {
        match self {
            BinaryMsg::Free(m) => m.cost(),
            BinaryMsg::Provable(m) => m.cost(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryTimer {
    Free(DbftTimer),
    Provable(QuadTimeout),
}

pub type BinaryStep = Step<BinaryMsg, BinaryTimer, u8>;

/// One binary consensus instance with either back end. Messages that arrive before the
/// local proposal are tallied and acted on once it is made.
pub enum BinaryConsensus {
    Free(Dbft),
    Provable(ProvableBinary),
}

fn lift_free(s: Step<DbftMsg, DbftTimer, u8>) -> BinaryStep {
    let (mut out, o) = s.lift(BinaryMsg::Free, BinaryTimer::Free);
    out.outputs = o;
    out
}

fn lift_prov(s: ProvableBinaryStep) -> BinaryStep {
    let (mut out, o) = s.lift(BinaryMsg::Provable, BinaryTimer::Provable);
    out.outputs = o;
    out
}

impl BinaryConsensus {
    /// `domain` separates signatures of distinct instances.
    pub fn new(backend: BinaryBackend, me: ProcessId, n: usize, t: usize, delta: Tick, keyring: &Keyring, domain: u64) -> Self {
        match backend {
            BinaryBackend::SignatureFree => BinaryConsensus::Free(Dbft::new(me, n, t, delta)),
            BinaryBackend::Provable => BinaryConsensus::Provable(ProvableBinary::new(
                me,
                n,
                t,
                keyring.clone(),
                domain,
                super::default_base_timeout(delta),
            )),
        }
    }

    pub fn decided(&self) -> Option<u8> {
        match self {
            BinaryConsensus::Free(b) => b.decided(),
            BinaryConsensus::Provable(b) => b.decided(),
        }
    }

    pub fn has_proposed(&self) -> bool {
        match self {
            BinaryConsensus::Free(b) => b.has_proposed(),
            BinaryConsensus::Provable(b) => b.has_proposed(),
        }
    }

    pub fn start(&mut self, env: &Env) -> BinaryStep {
        match self {
            BinaryConsensus::Free(_) => Step::new(),
            BinaryConsensus::Provable(b) => lift_prov(b.start(env)),
        }
    }

    pub fn propose(&mut self, env: &Env, bit: u8) -> BinaryStep {
        match self {
            BinaryConsensus::Free(b) => lift_free(b.propose(bit)),
            BinaryConsensus::Provable(b) => lift_prov(b.propose(env, bit)),
        }
    }

    pub fn handle(&mut self, env: &Env, from: ProcessId, msg: BinaryMsg) -> BinaryStep {
        match (self, msg) {
            (BinaryConsensus::Free(b), BinaryMsg::Free(m)) => lift_free(b.handle(from, m)),
            (BinaryConsensus::Provable(b), BinaryMsg::Provable(m)) => lift_prov(b.handle(env, from, m)),
            _ => Step::new(),
        }
    }

    pub fn on_timer(&mut self, env: &Env, timer: BinaryTimer) -> BinaryStep {
        match (self, timer) {
            (BinaryConsensus::Free(b), BinaryTimer::Free(t)) => lift_free(b.on_timer(t)),
            (BinaryConsensus::Provable(b), BinaryTimer::Provable(t)) => lift_prov(b.on_timer(env, t)),
            _ => Step::new(),
        }
    }
}

impl BinaryConsensus {
    /// Nothing further to contribute: the signature-free back end completed its closing
    /// rounds, or the provable one relayed its decision.
    pub fn is_finished(&self) -> bool {
        match self {
            BinaryConsensus::Free(b) => b.is_finished(),
            BinaryConsensus::Provable(b) => b.decided().is_some(),
        }
    }
}
