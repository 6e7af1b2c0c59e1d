use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::rc::Rc;

use serde::Serialize;
use serde_json::json;

use crate::crypto::{Digest, DigestWriter, Keyring, PartialSignature, ThresholdSignature};
use crate::simnet::{Env, Message, Step, Tick, WordCost};
use crate::validity::ProcessId;

/// A value together with the proof that makes it acceptable.
pub trait ProvablePair: Clone + Debug + PartialEq {
    /// Identity of the value the pair carries; certificates refer to it.
    fn digest(&self) -> Digest;
    fn cost(&self) -> WordCost;
}

/// Shared validity predicate over pairs.
pub type Verify<P> = Rc<dyn Fn(&P) -> bool>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prepare,
    PreCommit,
    Commit,
}

impl Phase {
    fn code(self) -> u64 {
        match self {
            Phase::Prepare => 1,
            Phase::PreCommit => 2,
            Phase::Commit => 3,
        }
    }
}

/// `n - t` signatures over `(phase, view, value digest)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuorumCertificate {
    pub phase: Phase,
    pub view: u64,
    pub digest: Digest,
    pub tsig: ThresholdSignature,
}

pub(super) fn vote_digest(domain: u64, phase: Phase, view: u64, d: &Digest) -> Digest {
    let mut w = DigestWriter::new("quad-vote");
    w.write_u64(domain).write_u64(phase.code()).write_u64(view).write_digest(d);
    w.finish()
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuadMsg<P> {
    /// To the leader of `view`: the sender's highest prepare certificate and its own pair.
    NewView { view: u64, high: Option<(QuorumCertificate, P)>, pair: Option<P> },
    Propose { view: u64, pair: P, justify: Option<QuorumCertificate> },
    Vote { phase: Phase, view: u64, digest: Digest, part: PartialSignature },
    Cert { qc: QuorumCertificate, pair: P },
    Decide { qc: QuorumCertificate, pair: P },
}

impl<P: ProvablePair> Message for QuadMsg<P> {
    fn tag(&self) -> &'static str {
        match self {
            QuadMsg::NewView { .. } => "NEW_VIEW",
            QuadMsg::Propose { .. } => "PROPOSE",
            QuadMsg::Vote { .. } => "VOTE",
            QuadMsg::Cert { .. } => "QC",
            QuadMsg::Decide { .. } => "DECIDE",
        }
    }

    fn cost(&self) -> WordCost {
        let qc = WordCost::tsigs(1);
        match self {
            QuadMsg::NewView { high, pair, .. } => {
                let mut c = WordCost::values(1);
                if let Some((_, p)) = high {
                    c += qc + p.cost();
                }
                if let Some(p) = pair {
                    c += p.cost();
                }
                c
            }
            QuadMsg::Propose { pair, justify, .. } => {
                WordCost::values(1) + pair.cost() + if justify.is_some() { qc } else { WordCost::default() }
            }
            QuadMsg::Vote { .. } => WordCost::values(2) + WordCost::digests(1) + WordCost::signatures(1),
            QuadMsg::Cert { pair, .. } | QuadMsg::Decide { pair, .. } => qc + pair.cost(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadTimeout(pub u64);

pub type QuadStep<P> = Step<QuadMsg<P>, QuadTimeout, P>;

/// Leader of `view`: `view mod n + 1`.
pub fn leader(view: u64, n: usize) -> ProcessId {
    ProcessId((view % n as u64) as u32 + 1)
}

/// Provable consensus: processes propose value-proof pairs and decide one pair that
/// satisfies the shared predicate.
///
/// Views run prepare, pre-commit and commit phases. Each phase collects `n - t` votes at
/// the leader, which broadcasts the resulting certificate. A pre-commit certificate locks
/// its value; a replica votes for a proposal only if it is unlocked, the proposal carries
/// the locked value, or the proposal is justified by a prepare certificate newer than the
/// lock. A view lasts `base << min(view, 16)` ticks. Deciders relay the commit
/// certificate to everyone once.
pub struct Quad<P> {
    n: usize,
    t: usize,
    me: ProcessId,
    keyring: Keyring,
    verify: Verify<P>,
    domain: u64,
    base_timeout: Tick,

    started: bool,
    view: u64,
    own: Option<P>,
    high: Option<(QuorumCertificate, P)>,
    lock: Option<(u64, Digest)>,
    voted: BTreeSet<(Phase, u64)>,
    sent_new_view: BTreeSet<u64>,
    new_views: BTreeMap<u64, BTreeMap<ProcessId, (Option<(QuorumCertificate, P)>, Option<P>)>>,
    proposed: BTreeSet<u64>,
    accepted: BTreeMap<u64, P>,
    votes: BTreeMap<(Phase, u64, Digest), BTreeMap<ProcessId, PartialSignature>>,
    certified: BTreeSet<(Phase, u64)>,
    decided: Option<P>,
}

impl<P: ProvablePair> Quad<P> {
    /// `domain` separates the certificates of distinct instances sharing one keyring.
    pub fn new(me: ProcessId, n: usize, t: usize, keyring: Keyring, verify: Verify<P>, domain: u64, base_timeout: Tick) -> Self {
        Quad {
            n,
            t,
            me,
            keyring,
            verify,
            domain,
            base_timeout: base_timeout.max(1),
            started: false,
            view: 0,
            own: None,
            high: None,
            lock: None,
            voted: BTreeSet::new(),
            sent_new_view: BTreeSet::new(),
            new_views: BTreeMap::new(),
            proposed: BTreeSet::new(),
            accepted: BTreeMap::new(),
            votes: BTreeMap::new(),
            certified: BTreeSet::new(),
            decided: None,
        }
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn decided(&self) -> Option<&P> {
        self.decided.as_ref()
    }

    pub fn lock(&self) -> Option<(u64, Digest)> {
        self.lock
    }

    fn quorum(&self) -> usize {
        self.n - self.t
    }

    fn timeout(&self, view: u64) -> Tick {
        self.base_timeout.saturating_mul(1 << view.min(16))
    }

    fn valid_qc(&self, qc: &QuorumCertificate, phase: Phase) -> bool {
        qc.phase == phase
            && self.keyring.verify_threshold(&vote_digest(self.domain, phase, qc.view, &qc.digest), &qc.tsig)
    }

    fn valid_pair(&self, pair: &P) -> bool {
        (self.verify)(pair)
    }

    /// Begins view 0. Pairs proposed later are sent to the current leader on arrival.
    pub fn start(&mut self, _env: &Env) -> QuadStep<P> {
        let mut s = Step::new();
        if !self.started && self.decided.is_none() {
            self.started = true;
            self.enter_view(0, &mut s);
        }
        s
    }

    /// Proposes `pair`; ignored unless it satisfies the predicate.
    pub fn propose(&mut self, _env: &Env, pair: P) -> QuadStep<P> {
        let mut s = Step::new();
        if self.own.is_some() || self.decided.is_some() || !self.valid_pair(&pair) {
            return s;
        }
        self.own = Some(pair);
        if self.started {
            self.send_new_view(&mut s);
        }
        s
    }

    fn enter_view(&mut self, view: u64, s: &mut QuadStep<P>) {
        self.view = view;
        s.note("view", json!({ "view": view }));
        s.timer(self.timeout(view), QuadTimeout(view));
        self.send_new_view(s);
    }

    fn send_new_view(&mut self, s: &mut QuadStep<P>) {
        let view = self.view;
        if self.sent_new_view.contains(&view) || (self.own.is_none() && self.high.is_none()) {
            return;
        }
        self.sent_new_view.insert(view);
        s.send(
            leader(view, self.n),
            QuadMsg::NewView { view, high: self.high.clone(), pair: self.own.clone() },
        );
    }

    pub fn on_timer(&mut self, _env: &Env, QuadTimeout(v): QuadTimeout) -> QuadStep<P> {
        let mut s = Step::new();
        if v == self.view && self.decided.is_none() {
            self.enter_view(v + 1, &mut s);
        }
        s
    }

    pub fn handle(&mut self, _env: &Env, from: ProcessId, msg: QuadMsg<P>) -> QuadStep<P> {
        let mut s = Step::new();
        if self.decided.is_some() || !self.started {
            return s;
        }
        match msg {
            QuadMsg::NewView { view, high, pair } => self.on_new_view(from, view, high, pair, &mut s),
            QuadMsg::Propose { view, pair, justify } => self.on_propose(from, view, pair, justify, &mut s),
            QuadMsg::Vote { phase, view, digest, part } => self.on_vote(from, phase, view, digest, part, &mut s),
            QuadMsg::Cert { qc, pair } => self.on_cert(qc, pair, &mut s),
            QuadMsg::Decide { qc, pair } => {
                if self.valid_qc(&qc, Phase::Commit) && pair.digest() == qc.digest && self.valid_pair(&pair) {
                    self.decide(qc, pair, &mut s);
                }
            }
        }
        s
    }

    fn on_new_view(
        &mut self,
        from: ProcessId,
        view: u64,
        high: Option<(QuorumCertificate, P)>,
        pair: Option<P>,
        s: &mut QuadStep<P>,
    ) {
        if leader(view, self.n) != self.me || view < self.view || self.proposed.contains(&view) {
            return;
        }
        let high = high.filter(|(qc, p)| {
            qc.view < view && p.digest() == qc.digest && self.valid_qc(qc, Phase::Prepare) && self.valid_pair(p)
        });
        let pair = pair.filter(|p| self.valid_pair(p));
        if high.is_none() && pair.is_none() {
            return;
        }
        self.new_views.entry(view).or_default().insert(from, (high, pair));
        self.try_propose(view, s);
    }

    fn try_propose(&mut self, view: u64, s: &mut QuadStep<P>) {
        let Some(entries) = self.new_views.get(&view) else { return };
        if entries.len() < self.quorum() || self.proposed.contains(&view) || view < self.view {
            return;
        }
        let best_high = entries
            .values()
            .filter_map(|(h, _)| h.as_ref())
            .max_by_key(|(qc, _)| qc.view)
            .cloned();
        let (pair, justify) = match best_high {
            Some((qc, p)) => (p, Some(qc)),
            None => match self.own.clone().or_else(|| entries.values().find_map(|(_, p)| p.clone())) {
                Some(p) => (p, None),
                None => return,
            },
        };
        if view > self.view {
            self.enter_view(view, s);
        }
        self.proposed.insert(view);
        self.new_views.retain(|v, _| *v > view);
        s.broadcast(QuadMsg::Propose { view, pair, justify });
    }

    fn on_propose(&mut self, from: ProcessId, view: u64, pair: P, justify: Option<QuorumCertificate>, s: &mut QuadStep<P>) {
        if from != leader(view, self.n) || view < self.view || !self.valid_pair(&pair) {
            return;
        }
        let d = pair.digest();
        let justify_view = match &justify {
            Some(qc) if qc.view < view && qc.digest == d && self.valid_qc(qc, Phase::Prepare) => Some(qc.view),
            Some(_) => return,
            None => None,
        };
        let safe = match self.lock {
            None => true,
            Some((lv, ld)) => ld == d || justify_view.is_some_and(|jv| jv > lv),
        };
        if !safe {
            return;
        }
        if view > self.view {
            self.enter_view(view, s);
        }
        self.accepted.entry(view).or_insert_with(|| pair.clone());
        self.vote(Phase::Prepare, view, d, s);
    }

    fn vote(&mut self, phase: Phase, view: u64, d: Digest, s: &mut QuadStep<P>) {
        if !self.voted.insert((phase, view)) {
            return;
        }
        let part = self.keyring.sign_partial(self.me, vote_digest(self.domain, phase, view, &d));
        s.send(leader(view, self.n), QuadMsg::Vote { phase, view, digest: d, part });
    }

    fn on_vote(&mut self, from: ProcessId, phase: Phase, view: u64, d: Digest, part: PartialSignature, s: &mut QuadStep<P>) {
        if leader(view, self.n) != self.me || part.signer() != from || self.certified.contains(&(phase, view)) {
            return;
        }
        if part.digest != vote_digest(self.domain, phase, view, &d) || !self.keyring.verify_partial(&part) {
            return;
        }
        let quorum = self.quorum();
        let bucket = self.votes.entry((phase, view, d)).or_default();
        bucket.insert(from, part);
        if bucket.len() < quorum {
            return;
        }
        let parts: Vec<PartialSignature> = bucket.values().copied().collect();
        let Some(pair) = self.accepted.get(&view).filter(|p| p.digest() == d).cloned() else { return };
        let Ok(tsig) = self.keyring.combine(&parts) else { return };
        self.certified.insert((phase, view));
        self.votes.remove(&(phase, view, d));
        s.note("qc", json!({ "phase": phase, "view": view, "digest": d.to_hex() }));
        s.broadcast(QuadMsg::Cert { qc: QuorumCertificate { phase, view, digest: d, tsig }, pair });
    }

    fn on_cert(&mut self, qc: QuorumCertificate, pair: P, s: &mut QuadStep<P>) {
        if pair.digest() != qc.digest || !self.valid_qc(&qc, qc.phase) || !self.valid_pair(&pair) {
            return;
        }
        if qc.view > self.view {
            self.enter_view(qc.view, s);
        }
        let (view, d) = (qc.view, qc.digest);
        match qc.phase {
            Phase::Prepare => {
                if self.high.as_ref().is_none_or(|(h, _)| h.view < view) {
                    self.high = Some((qc, pair));
                }
                if view == self.view {
                    self.vote(Phase::PreCommit, view, d, s);
                }
            }
            Phase::PreCommit => {
                if self.lock.is_none_or(|(lv, _)| lv < view) {
                    self.lock = Some((view, d));
                    s.note("lock", json!({ "view": view, "digest": d.to_hex() }));
                }
                if view == self.view {
                    self.vote(Phase::Commit, view, d, s);
                }
            }
            Phase::Commit => self.decide(qc, pair, s),
        }
    }

    fn decide(&mut self, qc: QuorumCertificate, pair: P, s: &mut QuadStep<P>) {
        if self.decided.is_some() {
            return;
        }
        s.note("decide", json!({ "view": qc.view, "digest": qc.digest.to_hex() }));
        self.decided = Some(pair.clone());
        s.output(pair.clone());
        s.broadcast(QuadMsg::Decide { qc, pair });
    }
}
