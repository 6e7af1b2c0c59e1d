use std::fmt::Debug;
use std::ops::{Add, AddAssign};

use serde::Serialize;

use crate::validity::{ProcessId, SystemParams};

/// Simulated time.
pub type Tick = u64;

/// What a process knows about its surroundings when it handles an event.
#[derive(Clone, Copy, Debug)]
pub struct Env {
    pub me: ProcessId,
    pub now: Tick,
    pub params: SystemParams,
    pub delta: Tick,
}

/// Word-level size of a message, by component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WordCost {
    pub values: u64,
    pub signatures: u64,
    pub tsigs: u64,
    pub digests: u64,
    pub vector_entries: u64,
}

impl WordCost {
    pub fn values(k: u64) -> Self {
        WordCost { values: k, ..Self::default() }
    }

    pub fn signatures(k: u64) -> Self {
        WordCost { signatures: k, ..Self::default() }
    }

    pub fn tsigs(k: u64) -> Self {
        WordCost { tsigs: k, ..Self::default() }
    }

    pub fn digests(k: u64) -> Self {
        WordCost { digests: k, ..Self::default() }
    }

    pub fn vector(k: u64) -> Self {
        WordCost { vector_entries: k, ..Self::default() }
    }
}

impl Add for WordCost {
    type Output = WordCost;

    fn add(self, o: WordCost) -> WordCost {
        WordCost {
            values: self.values + o.values,
            signatures: self.signatures + o.signatures,
            tsigs: self.tsigs + o.tsigs,
            digests: self.digests + o.digests,
            vector_entries: self.vector_entries + o.vector_entries,
        }
    }
}

impl AddAssign for WordCost {
    fn add_assign(&mut self, o: WordCost) {
        *self = *self + o;
    }
}

/// Word weights per component. Every envelope counts at least one word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordAccounting {
    pub value: u64,
    pub signature: u64,
    pub tsig: u64,
    pub digest: u64,
    pub vector_entry: u64,
}

impl Default for WordAccounting {
    fn default() -> Self {
        WordAccounting { value: 1, signature: 1, tsig: 1, digest: 1, vector_entry: 1 }
    }
}

impl WordAccounting {
    pub fn words(&self, c: &WordCost) -> u64 {
        let w = c.values * self.value
            + c.signatures * self.signature
            + c.tsigs * self.tsig
            + c.digests * self.digest
            + c.vector_entries * self.vector_entry;
        w.max(1)
    }
}

/// A protocol message.
pub trait Message: Clone + Debug {
    /// Wire tag, e.g. `PROPOSAL`.
    fn tag(&self) -> &'static str;
    fn cost(&self) -> WordCost;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    To(ProcessId),
    /// Every process, self included, in index order.
    All,
}

/// Protocol annotation recorded in the trace (QC formed, view entered, vector cached...).
#[derive(Clone, Debug, PartialEq)]
pub struct Note {
    pub kind: String,
    pub detail: serde_json::Value,
}

/// The effects of handling one event.
#[derive(Debug)]
pub struct Step<M, T, O> {
    pub sends: Vec<(Target, M)>,
    pub timers: Vec<(Tick, T)>,
    pub outputs: Vec<O>,
    pub notes: Vec<Note>,
    pub halt: bool,
}

impl<M, T, O> Default for Step<M, T, O> {
    fn default() -> Self {
        Step { sends: Vec::new(), timers: Vec::new(), outputs: Vec::new(), notes: Vec::new(), halt: false }
    }
}

impl<M, T, O> Step<M, T, O> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn halted() -> Self {
        Step { halt: true, ..Self::default() }
    }

    pub fn send(&mut self, to: ProcessId, m: M) -> &mut Self {
        self.sends.push((Target::To(to), m));
        self
    }

    pub fn broadcast(&mut self, m: M) -> &mut Self {
        self.sends.push((Target::All, m));
        self
    }

    pub fn timer(&mut self, after: Tick, t: T) -> &mut Self {
        self.timers.push((after, t));
        self
    }

    pub fn output(&mut self, o: O) -> &mut Self {
        self.outputs.push(o);
        self
    }

    pub fn note(&mut self, kind: &str, detail: serde_json::Value) -> &mut Self {
        self.notes.push(Note { kind: kind.to_string(), detail });
        self
    }

    pub fn extend(&mut self, other: Step<M, T, O>) {
        self.sends.extend(other.sends);
        self.timers.extend(other.timers);
        self.outputs.extend(other.outputs);
        self.notes.extend(other.notes);
        self.halt |= other.halt;
    }

    pub fn is_empty(&self) -> bool {
        self.sends.is_empty() && self.timers.is_empty() && self.outputs.is_empty() && self.notes.is_empty() && !self.halt
    }

    /// Lifts a sub-protocol step into a parent's message and timer types. The child's
    /// outputs are handed back for the parent to act on; its halt flag is dropped.
    pub fn lift<M2, T2, O2>(self, fm: impl Fn(M) -> M2, ft: impl Fn(T) -> T2) -> (Step<M2, T2, O2>, Vec<O>) {
        let step = Step {
            sends: self.sends.into_iter().map(|(to, m)| (to, fm(m))).collect(),
            timers: self.timers.into_iter().map(|(d, t)| (d, ft(t))).collect(),
            outputs: Vec::new(),
            notes: self.notes,
            halt: false,
        };
        (step, self.outputs)
    }
}

/// A deterministic process automaton.
pub trait Node {
    type Msg: Message;
    type Timer: Clone + Debug + PartialEq;
    type Output: Clone + Debug;

    fn start(&mut self, env: &Env) -> Step<Self::Msg, Self::Timer, Self::Output>;

    fn on_message(
        &mut self,
        env: &Env,
        from: ProcessId,
        msg: Self::Msg,
    ) -> Step<Self::Msg, Self::Timer, Self::Output>;

    fn on_timer(&mut self, env: &Env, timer: Self::Timer) -> Step<Self::Msg, Self::Timer, Self::Output>;
}

pub type BoxedNode<M, T, O> = Box<dyn Node<Msg = M, Timer = T, Output = O>>;

impl<N: Node + ?Sized> Node for Box<N> {
    type Msg = N::Msg;
    type Timer = N::Timer;
    type Output = N::Output;

    fn start(&mut self, env: &Env) -> Step<Self::Msg, Self::Timer, Self::Output> {
        (**self).start(env)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: Self::Msg) -> Step<Self::Msg, Self::Timer, Self::Output> {
        (**self).on_message(env, from, msg)
    }

    fn on_timer(&mut self, env: &Env, timer: Self::Timer) -> Step<Self::Msg, Self::Timer, Self::Output> {
        (**self).on_timer(env, timer)
    }
}
