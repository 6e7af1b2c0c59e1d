use std::collections::BTreeSet;
use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::node::{BoxedNode, Env, Node, Step, Target, Tick};
use super::SimError;
use crate::validity::{ProcessId, SystemParams, Value, ValueSpace};

/// Byzantine behavior library.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AdversaryKind {
    /// Every process is correct.
    None,
    /// Faulty processes never send.
    Silent,
    /// Faulty processes run the protocol and stop sending after tick `at`.
    CrashAt { at: Tick },
    /// Faulty processes run two honest copies with different proposals, one talking to
    /// each half of the system.
    EquivocateLeader,
    /// `ceil(t/2)` faulty processes run the protocol but ignore the first `ceil(t/2)`
    /// messages they receive from others and never send to each other; GST is 0.
    LowerBound,
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryKind::None => f.write_str("none"),
            AdversaryKind::Silent => f.write_str("silent"),
            AdversaryKind::CrashAt { at } => write!(f, "crash_at:{at}"),
            AdversaryKind::EquivocateLeader => f.write_str("equivocate_leader"),
            AdversaryKind::LowerBound => f.write_str("lower_bound"),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = SimError;

    /// Accepts `none`, `silent`, `crash_at:T` (or `crash_at(T)`), `equivocate_leader`,
    /// `lower_bound`.
    fn from_str(s: &str) -> Result<Self, SimError> {
        let s = s.trim();
        match s {
            "none" => return Ok(AdversaryKind::None),
            "silent" => return Ok(AdversaryKind::Silent),
            "equivocate_leader" => return Ok(AdversaryKind::EquivocateLeader),
            "lower_bound" => return Ok(AdversaryKind::LowerBound),
            _ => {}
        }
        let arg = s
            .strip_prefix("crash_at:")
            .or_else(|| s.strip_prefix("crash_at(").and_then(|r| r.strip_suffix(')')));
        match arg.and_then(|a| a.trim().parse().ok()) {
            Some(at) => Ok(AdversaryKind::CrashAt { at }),
            None => Err(SimError::UnknownAdversary(s.to_string())),
        }
    }
}

/// A concrete faulty set and behavior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adversary {
    pub kind: AdversaryKind,
    pub faulty: BTreeSet<ProcessId>,
    /// GST forced by the behavior (`lower_bound` runs with GST = 0).
    pub gst_override: Option<Tick>,
}

/// Places `count` faulty processes for `kind`.
///
/// Silent and crashing processes take the highest indices. An equivocator takes P1 (the
/// first leader) plus the highest `count - 1`. The lower-bound group is the highest
/// `ceil(t/2)` indices regardless of `count`.
pub fn make_adversary(kind: &AdversaryKind, params: SystemParams, count: usize) -> Result<Adversary, SimError> {
    let n = params.n();
    let top = |k: usize| (n - k + 1..=n).map(|i| ProcessId(i as u32)).collect::<BTreeSet<_>>();
    let (faulty, gst_override) = match kind {
        AdversaryKind::None => (BTreeSet::new(), None),
        AdversaryKind::LowerBound => (top(params.t().div_ceil(2)), Some(0)),
        _ if count > params.t() => {
            return Err(SimError::InvalidScenario(format!("{count} faulty exceeds t = {}", params.t())))
        }
        AdversaryKind::Silent | AdversaryKind::CrashAt { .. } => (top(count), None),
        AdversaryKind::EquivocateLeader => {
            let mut f = top(count.saturating_sub(1));
            if count > 0 {
                f.insert(ProcessId(1));
            }
            (f, None)
        }
    };
    Ok(Adversary { kind: kind.clone(), faulty, gst_override })
}

impl Adversary {
    pub fn is_faulty(&self, p: ProcessId) -> bool {
        self.faulty.contains(&p)
    }

    /// One node per process. Correct processes (and the honest parts of faulty ones) are
    /// built by `honest(p, proposal)`; `proposals` is indexed by process.
    pub fn build<N, F>(&self, params: SystemParams, space: &ValueSpace, proposals: &[Value], mut honest: F) -> Vec<BoxedNode<N::Msg, N::Timer, N::Output>>
    where
        N: Node + 'static,
        F: FnMut(ProcessId, Value) -> N,
    {
        let n = params.n();
        let b_group = self.faulty.clone();
        let ignore = params.t().div_ceil(2);
        params
            .processes()
            .map(|p| -> BoxedNode<N::Msg, N::Timer, N::Output> {
                let v = proposals[p.index()];
                if !self.is_faulty(p) {
                    return Box::new(honest(p, v));
                }
                match &self.kind {
                    AdversaryKind::None => Box::new(honest(p, v)),
                    AdversaryKind::Silent => Box::new(Silent::new()),
                    AdversaryKind::CrashAt { at } => Box::new(CrashAt::new(honest(p, v), *at)),
                    AdversaryKind::EquivocateLeader => {
                        let lo = space.inputs()[0];
                        let hi = *space.inputs().last().expect("nonempty inputs");
                        let half: BTreeSet<ProcessId> = (1..=n.div_ceil(2)).map(|i| ProcessId(i as u32)).collect();
                        Box::new(Split::new(honest(p, lo), honest(p, hi), half, n))
                    }
                    AdversaryKind::LowerBound => {
                        Box::new(LowerBound::new(honest(p, v), ignore, b_group.clone(), n))
                    }
                }
            })
            .collect()
    }
}

/// Never sends, never decides.
pub struct Silent<M, T, O>(PhantomData<fn() -> (M, T, O)>);

impl<M, T, O> Silent<M, T, O> {
    pub fn new() -> Self {
        Silent(PhantomData)
    }
}

impl<M, T, O> Default for Silent<M, T, O> {
    fn default() -> Self {
        Self::new()
    }
}

impl<M: super::Message, T: Clone + fmt::Debug + PartialEq, O: Clone + fmt::Debug> Node for Silent<M, T, O> {
    type Msg = M;
    type Timer = T;
    type Output = O;

    fn start(&mut self, _: &Env) -> Step<M, T, O> {
        Step::new()
    }

    fn on_message(&mut self, _: &Env, _: ProcessId, _: M) -> Step<M, T, O> {
        Step::new()
    }

    fn on_timer(&mut self, _: &Env, _: T) -> Step<M, T, O> {
        Step::new()
    }
}

/// Runs `inner` faithfully until `at`, then stops.
pub struct CrashAt<N> {
    inner: N,
    at: Tick,
}

impl<N> CrashAt<N> {
    pub fn new(inner: N, at: Tick) -> Self {
        CrashAt { inner, at }
    }
}

impl<N: Node> Node for CrashAt<N> {
    type Msg = N::Msg;
    type Timer = N::Timer;
    type Output = N::Output;

    fn start(&mut self, env: &Env) -> Step<N::Msg, N::Timer, N::Output> {
        if env.now > self.at {
            return Step::halted();
        }
        self.inner.start(env)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: N::Msg) -> Step<N::Msg, N::Timer, N::Output> {
        if env.now > self.at {
            return Step::halted();
        }
        self.inner.on_message(env, from, msg)
    }

    fn on_timer(&mut self, env: &Env, t: N::Timer) -> Step<N::Msg, N::Timer, N::Output> {
        if env.now > self.at {
            return Step::halted();
        }
        self.inner.on_timer(env, t)
    }
}

/// Rewrites every send to explicit receivers accepted by `keep`.
fn restrict<M: Clone, T, O>(step: &mut Step<M, T, O>, n: usize, keep: impl Fn(ProcessId) -> bool) {
    let sends = std::mem::take(&mut step.sends);
    for (target, m) in sends {
        match target {
            Target::To(p) if keep(p) => step.sends.push((Target::To(p), m)),
            Target::To(_) => {}
            Target::All => {
                for p in ProcessId::all(n).filter(|p| keep(*p)) {
                    step.sends.push((Target::To(p), m.clone()));
                }
            }
        }
    }
}

/// Two honest copies with different inputs. Both receive everything; copy A talks only
/// to `half_a`, copy B only to the rest.
pub struct Split<N: Node> {
    a: N,
    b: N,
    half_a: BTreeSet<ProcessId>,
    n: usize,
    pending_a: Vec<(Tick, N::Timer)>,
    pending_b: Vec<(Tick, N::Timer)>,
}

impl<N: Node> Split<N> {
    pub fn new(a: N, b: N, half_a: BTreeSet<ProcessId>, n: usize) -> Self {
        Split { a, b, half_a, n, pending_a: Vec::new(), pending_b: Vec::new() }
    }

    fn merge(
        &mut self,
        env: &Env,
        mut sa: Step<N::Msg, N::Timer, N::Output>,
        mut sb: Step<N::Msg, N::Timer, N::Output>,
    ) -> Step<N::Msg, N::Timer, N::Output> {
        let half = &self.half_a;
        restrict(&mut sa, self.n, |p| half.contains(&p));
        restrict(&mut sb, self.n, |p| !half.contains(&p));
        self.pending_a.extend(sa.timers.iter().map(|(d, t)| (env.now + d, t.clone())));
        self.pending_b.extend(sb.timers.iter().map(|(d, t)| (env.now + d, t.clone())));
        sa.outputs.clear();
        sb.outputs.clear();
        sa.halt = false;
        sb.halt = false;
        sa.extend(sb);
        sa
    }
}

fn take_timer<T: PartialEq>(pending: &mut Vec<(Tick, T)>, now: Tick, t: &T) -> bool {
    match pending.iter().position(|(at, x)| *at == now && x == t) {
        Some(i) => {
            pending.remove(i);
            true
        }
        None => false,
    }
}

impl<N: Node> Node for Split<N> {
    type Msg = N::Msg;
    type Timer = N::Timer;
    type Output = N::Output;

    fn start(&mut self, env: &Env) -> Step<N::Msg, N::Timer, N::Output> {
        let sa = self.a.start(env);
        let sb = self.b.start(env);
        self.merge(env, sa, sb)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: N::Msg) -> Step<N::Msg, N::Timer, N::Output> {
        let sa = self.a.on_message(env, from, msg.clone());
        let sb = self.b.on_message(env, from, msg);
        self.merge(env, sa, sb)
    }

    fn on_timer(&mut self, env: &Env, t: N::Timer) -> Step<N::Msg, N::Timer, N::Output> {
        if take_timer(&mut self.pending_a, env.now, &t) {
            let sa = self.a.on_timer(env, t);
            self.merge(env, sa, Step::new())
        } else if take_timer(&mut self.pending_b, env.now, &t) {
            let sb = self.b.on_timer(env, t);
            self.merge(env, Step::new(), sb)
        } else {
            Step::new()
        }
    }
}

/// Runs `inner` but drops the first `ignore` messages from other processes and never
/// sends to other members of `group`.
pub struct LowerBound<N> {
    inner: N,
    ignore: usize,
    group: BTreeSet<ProcessId>,
    n: usize,
}

impl<N> LowerBound<N> {
    pub fn new(inner: N, ignore: usize, group: BTreeSet<ProcessId>, n: usize) -> Self {
        LowerBound { inner, ignore, group, n }
    }

    fn filter<M: Clone, T, O>(&self, me: ProcessId, mut step: Step<M, T, O>) -> Step<M, T, O> {
        let group = &self.group;
        restrict(&mut step, self.n, |p| p == me || !group.contains(&p));
        step
    }
}

impl<N: Node> Node for LowerBound<N> {
    type Msg = N::Msg;
    type Timer = N::Timer;
    type Output = N::Output;

    fn start(&mut self, env: &Env) -> Step<N::Msg, N::Timer, N::Output> {
        let s = self.inner.start(env);
        self.filter(env.me, s)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: N::Msg) -> Step<N::Msg, N::Timer, N::Output> {
        if from != env.me && self.ignore > 0 {
            self.ignore -= 1;
            return Step::new();
        }
        let s = self.inner.on_message(env, from, msg);
        self.filter(env.me, s)
    }

    fn on_timer(&mut self, env: &Env, t: N::Timer) -> Step<N::Msg, N::Timer, N::Output> {
        let s = self.inner.on_timer(env, t);
        self.filter(env.me, s)
    }
}
