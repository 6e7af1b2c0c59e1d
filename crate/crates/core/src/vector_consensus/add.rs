use std::collections::BTreeMap;

use serde_json::json;

use super::{vector_digest, vector_json};
use crate::crypto::Digest;
use crate::simnet::{Env, Message, Node, Step, WordCost};
use crate::validity::{InputConfiguration, ProcessId};

/// A holder's copy of the blob.
#[derive(Clone, Debug, PartialEq)]
pub struct AddShare(pub InputConfiguration);

impl Message for AddShare {
    fn tag(&self) -> &'static str {
        "ADD_SHARE"
    }

    fn cost(&self) -> WordCost {
        WordCost::vector(self.0.len() as u64)
    }
}

pub type AddStep = Step<AddShare, (), InputConfiguration>;

/// Data dissemination, naive fallback: holders broadcast the blob; everyone outputs the
/// first received blob whose hash matches the expected digest. Shares arriving before the
/// local input are kept, one per sender.
#[derive(Default)]
pub struct Add {
    expected: Option<Digest>,
    early: BTreeMap<ProcessId, InputConfiguration>,
    output: Option<InputConfiguration>,
}

impl Add {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn output(&self) -> Option<&InputConfiguration> {
        self.output.as_ref()
    }

    /// Local input: the blob if held (`None` is the empty input) and the digest it must match.
    pub fn input(&mut self, held: Option<InputConfiguration>, expected: Digest) -> AddStep {
        let mut s = Step::new();
        if self.expected.is_some() {
            return s;
        }
        self.expected = Some(expected);
        s.note("add_input", json!({ "holder": held.is_some(), "digest": expected.to_hex() }));
        match held {
            Some(v) if vector_digest(&v) == expected => {
                s.broadcast(AddShare(v.clone()));
                self.accept(v, &mut s);
            }
            _ => {
                let early = std::mem::take(&mut self.early);
                if let Some(v) = early.into_values().find(|v| vector_digest(v) == expected) {
                    self.accept(v, &mut s);
                }
            }
        }
        s
    }

    pub fn handle(&mut self, from: ProcessId, AddShare(v): AddShare) -> AddStep {
        let mut s = Step::new();
        if self.output.is_some() {
            return s;
        }
        match self.expected {
            Some(d) if vector_digest(&v) == d => self.accept(v, &mut s),
            Some(_) => {}
            None => {
                self.early.entry(from).or_insert(v);
            }
        }
        s
    }

    fn accept(&mut self, v: InputConfiguration, s: &mut AddStep) {
        if self.output.is_none() {
            s.note("add_output", json!({ "vector": vector_json(&v) }));
            self.output = Some(v.clone());
            s.output(v);
        }
    }
}

/// Standalone data-dissemination process with a fixed input.
pub struct AddNode {
    add: Add,
    input: Option<(Option<InputConfiguration>, Digest)>,
}

impl AddNode {
    pub fn new(held: Option<InputConfiguration>, expected: Digest) -> Self {
        AddNode { add: Add::new(), input: Some((held, expected)) }
    }

    /// A faulty process that broadcasts `blob` whatever it hashes to.
    pub fn liar(blob: InputConfiguration) -> impl Node<Msg = AddShare, Timer = (), Output = InputConfiguration> {
        struct Liar(InputConfiguration);
        impl Node for Liar {
            type Msg = AddShare;
            type Timer = ();
            type Output = InputConfiguration;
            fn start(&mut self, _: &Env) -> AddStep {
                let mut s = Step::new();
                s.broadcast(AddShare(self.0.clone()));
                s
            }
            fn on_message(&mut self, _: &Env, _: ProcessId, _: AddShare) -> AddStep {
                Step::new()
            }
            fn on_timer(&mut self, _: &Env, _: ()) -> AddStep {
                Step::new()
            }
        }
        Liar(blob)
    }
}

impl Node for AddNode {
    type Msg = AddShare;
    type Timer = ();
    type Output = InputConfiguration;

    fn start(&mut self, _: &Env) -> AddStep {
        match self.input.take() {
            Some((held, d)) => self.add.input(held, d),
            None => Step::new(),
        }
    }

    fn on_message(&mut self, _: &Env, from: ProcessId, m: AddShare) -> AddStep {
        self.add.handle(from, m)
    }

    fn on_timer(&mut self, _: &Env, _: ()) -> AddStep {
        Step::new()
    }
}
