use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::Serialize;
use serde_json::{json, Value as Json};

use super::node::{Tick, WordAccounting, WordCost};
use super::SimError;
use crate::validity::{ProcessId, SystemParams};

pub const TRACE_SCHEMA: &str = "validus-trace";
pub const TRACE_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeRecord {
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub tag: String,
    pub cost: WordCost,
    pub send_time: Tick,
    pub deliver_time: Tick,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    Start,
    /// Index into `Trace::envelopes`.
    Send(usize),
    Deliver(usize),
    Timer,
    /// Index into `Trace::outputs`.
    Output(usize),
    Note { kind: String, detail: Json },
    Halt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub t: Tick,
    pub proc: ProcessId,
    pub kind: EventKind,
}

/// Complete record of one simulated execution.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<O> {
    pub params: SystemParams,
    pub gst: Tick,
    pub delta: Tick,
    pub max_ticks: Tick,
    pub faulty: BTreeSet<ProcessId>,
    pub events: Vec<Event>,
    pub envelopes: Vec<EnvelopeRecord>,
    /// Every output in emission order; the first output of a process is its decision.
    pub outputs: Vec<(ProcessId, Tick, O)>,
    pub halted: Vec<bool>,
    pub end_time: Tick,
}

impl<O> Trace<O> {
    pub fn is_correct(&self, p: ProcessId) -> bool {
        !self.faulty.contains(&p)
    }

    pub fn correct(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.params.processes().filter(|p| self.is_correct(*p))
    }

    /// First output of each process, indexed by `ProcessId::index`.
    pub fn decisions(&self) -> Vec<Option<(&O, Tick)>> {
        let mut out = vec![None; self.params.n()];
        for (p, t, o) in &self.outputs {
            let slot = &mut out[p.index()];
            if slot.is_none() {
                *slot = Some((o, *t));
            }
        }
        out
    }

    pub fn decision(&self, p: ProcessId) -> Option<(&O, Tick)> {
        self.outputs.iter().find(|(q, _, _)| *q == p).map(|(_, t, o)| (o, *t))
    }

    pub fn outputs_of(&self, p: ProcessId) -> impl Iterator<Item = (&O, Tick)> {
        self.outputs.iter().filter(move |(q, _, _)| *q == p).map(|(_, t, o)| (o, *t))
    }

    pub fn all_correct_decided(&self) -> bool {
        let d = self.decisions();
        self.correct().all(|p| d[p.index()].is_some())
    }

    /// Termination failed at the horizon.
    pub fn horizon_exceeded(&self) -> bool {
        !self.all_correct_decided()
    }

    /// No faulty process sent anything.
    pub fn is_canonical(&self) -> bool {
        self.envelopes.iter().all(|e| self.is_correct(e.sender))
    }

    pub fn notes(&self, kind: &str) -> impl Iterator<Item = (Tick, ProcessId, &Json)> {
        let kind = kind.to_string();
        self.events.iter().filter_map(move |e| match &e.kind {
            EventKind::Note { kind: k, detail } if *k == kind => Some((e.t, e.proc, detail)),
            _ => None,
        })
    }

    /// Envelopes sent, in send order, with the given tag.
    pub fn sent_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a EnvelopeRecord> {
        self.envelopes.iter().filter(move |e| e.tag == tag)
    }

    /// The same trace with every output converted, or the first output `f` rejects.
    pub fn try_map_outputs<P>(self, mut f: impl FnMut(&O) -> Option<P>) -> Result<Trace<P>, O> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for (p, t, o) in self.outputs {
            match f(&o) {
                Some(x) => outputs.push((p, t, x)),
                None => return Err(o),
            }
        }
        Ok(Trace {
            params: self.params,
            gst: self.gst,
            delta: self.delta,
            max_ticks: self.max_ticks,
            faulty: self.faulty,
            events: self.events,
            envelopes: self.envelopes,
            outputs,
            halted: self.halted,
            end_time: self.end_time,
        })
    }

    /// Structural invariants of the execution model. Returns every violation found.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.params.n();
        let mut started = vec![false; n];
        let mut last_t = 0;
        let mut delivered = vec![false; self.envelopes.len()];
        let mut sent = vec![false; self.envelopes.len()];
        for (i, e) in self.events.iter().enumerate() {
            if e.t < last_t {
                errs.push(format!("event {i} at {} precedes the previous event at {last_t}", e.t));
            }
            last_t = e.t;
            if e.proc.0 == 0 || e.proc.index() >= n {
                errs.push(format!("event {i} names unknown process {}", e.proc));
                continue;
            }
            let pi = e.proc.index();
            match &e.kind {
                EventKind::Start => {
                    if started[pi] {
                        errs.push(format!("{} started twice", e.proc));
                    }
                    started[pi] = true;
                    if self.is_correct(e.proc) && e.t > self.gst {
                        errs.push(format!("correct {} started at {} after GST {}", e.proc, e.t, self.gst));
                    }
                    continue;
                }
                _ if !started[pi] => errs.push(format!("{} acted at {} before its start event", e.proc, e.t)),
                _ => {}
            }
            match &e.kind {
                EventKind::Send(k) => match self.envelopes.get(*k) {
                    Some(env) if env.sender == e.proc && env.send_time == e.t => sent[*k] = true,
                    _ => errs.push(format!("send event {i} does not match envelope {k}")),
                },
                EventKind::Deliver(k) => match self.envelopes.get(*k) {
                    Some(env) => {
                        if !sent[*k] {
                            errs.push(format!("envelope {k} delivered before it was sent"));
                        }
                        if delivered[*k] {
                            errs.push(format!("envelope {k} delivered twice"));
                        }
                        delivered[*k] = true;
                        if env.receiver != e.proc || env.deliver_time != e.t {
                            errs.push(format!("deliver event {i} does not match envelope {k}"));
                        }
                    }
                    None => errs.push(format!("deliver event {i} names unknown envelope {k}")),
                },
                _ => {}
            }
        }
        for (k, env) in self.envelopes.iter().enumerate() {
            let deadline = env.send_time.max(self.gst) + self.delta;
            if env.deliver_time > deadline {
                errs.push(format!(
                    "envelope {k} sent at {} delivered at {} after deadline {deadline}",
                    env.send_time, env.deliver_time
                ));
            }
            if env.deliver_time <= env.send_time {
                errs.push(format!("envelope {k} delivered no later than it was sent"));
            }
        }
        errs
    }

    /// Every envelope to a correct, non-halted receiver that was due by the end of the
    /// run was delivered.
    pub fn fair(&self) -> bool {
        let delivered: BTreeSet<usize> = self
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Deliver(k) => Some(k),
                _ => None,
            })
            .collect();
        let halt_time: HashMap<ProcessId, Tick> = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Halt)
            .map(|e| (e.proc, e.t))
            .collect();
        self.envelopes.iter().enumerate().all(|(k, env)| {
            delivered.contains(&k)
                || !self.is_correct(env.receiver)
                || env.deliver_time > self.end_time
                || halt_time.get(&env.receiver).is_some_and(|h| *h <= env.deliver_time)
        })
    }
}

fn event_json<O: Serialize>(trace: &Trace<O>, e: &Event, acc: &WordAccounting) -> Json {
    let mut obj = json!({ "t": e.t, "proc": e.proc.0 });
    let m = obj.as_object_mut().expect("object");
    match &e.kind {
        EventKind::Start => {
            m.insert("kind".into(), "start".into());
        }
        EventKind::Send(k) => {
            let env = &trace.envelopes[*k];
            m.insert("kind".into(), "send".into());
            m.insert("to".into(), env.receiver.0.into());
            m.insert("msg_type".into(), env.tag.clone().into());
            m.insert("words".into(), acc.words(&env.cost).into());
            m.insert("env".into(), (*k).into());
            m.insert("deliver_at".into(), env.deliver_time.into());
        }
        EventKind::Deliver(k) => {
            let env = &trace.envelopes[*k];
            m.insert("kind".into(), "deliver".into());
            m.insert("from".into(), env.sender.0.into());
            m.insert("msg_type".into(), env.tag.clone().into());
            m.insert("words".into(), acc.words(&env.cost).into());
            m.insert("env".into(), (*k).into());
        }
        EventKind::Timer => {
            m.insert("kind".into(), "timer".into());
        }
        EventKind::Output(k) => {
            m.insert("kind".into(), "decide".into());
            m.insert("value".into(), serde_json::to_value(&trace.outputs[*k].2).unwrap_or(Json::Null));
        }
        EventKind::Note { kind, detail } => {
            m.insert("kind".into(), "note".into());
            m.insert("note".into(), kind.clone().into());
            m.insert("value".into(), detail.clone());
        }
        EventKind::Halt => {
            m.insert("kind".into(), "halt".into());
        }
    }
    obj
}

impl<O: Serialize> Trace<O> {
    /// JSON lines: a header object, then one object per event.
    pub fn write_jsonl<W: Write>(&self, mut w: W, scenario: &Json, acc: &WordAccounting) -> std::io::Result<()> {
        let header = json!({
            "schema": TRACE_SCHEMA,
            "version": TRACE_VERSION,
            "n": self.params.n(),
            "t": self.params.t(),
            "gst": self.gst,
            "delta": self.delta,
            "max_ticks": self.max_ticks,
            "end_time": self.end_time,
            "faulty": self.faulty.iter().map(|p| p.0).collect::<Vec<_>>(),
            "scenario": scenario,
        });
        writeln!(w, "{header}")?;
        for e in &self.events {
            writeln!(w, "{}", event_json(self, e, acc))?;
        }
        Ok(())
    }
}

/// A trace read back from JSON lines. Decision values stay as JSON; each envelope's cost
/// is its exported word count.
pub struct TraceFile {
    pub scenario: Json,
    pub trace: Trace<Json>,
}

fn field<'a>(obj: &'a Json, key: &str, line: usize) -> Result<&'a Json, SimError> {
    obj.get(key).ok_or_else(|| SimError::MalformedTrace(format!("line {line}: missing `{key}`")))
}

fn as_u64(obj: &Json, key: &str, line: usize) -> Result<u64, SimError> {
    field(obj, key, line)?
        .as_u64()
        .ok_or_else(|| SimError::MalformedTrace(format!("line {line}: `{key}` is not an unsigned integer")))
}

fn as_proc(obj: &Json, key: &str, line: usize) -> Result<ProcessId, SimError> {
    Ok(ProcessId(as_u64(obj, key, line)? as u32))
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<TraceFile, SimError> {
    let mut lines = r.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| SimError::MalformedTrace("empty trace".into()))?;
    let head: Json = serde_json::from_str(&head.map_err(|e| SimError::MalformedTrace(e.to_string()))?)
        .map_err(|e| SimError::MalformedTrace(format!("line 1: {e}")))?;
    if head.get("schema").and_then(Json::as_str) != Some(TRACE_SCHEMA) {
        return Err(SimError::MalformedTrace("line 1: not a trace header".into()));
    }
    let version = as_u64(&head, "version", 1)?;
    if version != TRACE_VERSION {
        return Err(SimError::SchemaVersion { found: version, expected: TRACE_VERSION });
    }
    let n = as_u64(&head, "n", 1)? as usize;
    let t = as_u64(&head, "t", 1)? as usize;
    let params = SystemParams::new(n, t).map_err(|e| SimError::MalformedTrace(e.to_string()))?;
    let faulty = field(&head, "faulty", 1)?
        .as_array()
        .ok_or_else(|| SimError::MalformedTrace("line 1: `faulty` is not an array".into()))?
        .iter()
        .map(|v| v.as_u64().map(|x| ProcessId(x as u32)))
        .collect::<Option<BTreeSet<_>>>()
        .ok_or_else(|| SimError::MalformedTrace("line 1: bad `faulty` entry".into()))?;
    let mut trace = Trace {
        params,
        gst: as_u64(&head, "gst", 1)?,
        delta: as_u64(&head, "delta", 1)?,
        max_ticks: as_u64(&head, "max_ticks", 1)?,
        faulty,
        events: Vec::new(),
        envelopes: Vec::new(),
        outputs: Vec::new(),
        halted: vec![false; n],
        end_time: as_u64(&head, "end_time", 1)?,
    };
    let mut env_ids: HashMap<u64, usize> = HashMap::new();
    for (i, line) in lines {
        let ln = i + 1;
        let line = line.map_err(|e| SimError::MalformedTrace(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: Json =
            serde_json::from_str(&line).map_err(|e| SimError::MalformedTrace(format!("line {ln}: {e}")))?;
        let t = as_u64(&obj, "t", ln)?;
        let proc = as_proc(&obj, "proc", ln)?;
        if proc.0 == 0 || proc.index() >= n {
            return Err(SimError::MalformedTrace(format!("line {ln}: process {} out of range", proc.0)));
        }
        let kind = field(&obj, "kind", ln)?.as_str().unwrap_or_default();
        let kind = match kind {
            "start" => EventKind::Start,
            "timer" => EventKind::Timer,
            "halt" => {
                if let Some(h) = trace.halted.get_mut(proc.index()) {
                    *h = true;
                }
                EventKind::Halt
            }
            "send" => {
                let id = as_u64(&obj, "env", ln)?;
                let words = as_u64(&obj, "words", ln)?;
                let to = as_proc(&obj, "to", ln)?;
                if to.0 == 0 || to.index() >= n {
                    return Err(SimError::MalformedTrace(format!("line {ln}: receiver {} out of range", to.0)));
                }
                trace.envelopes.push(EnvelopeRecord {
                    sender: proc,
                    receiver: to,
                    tag: field(&obj, "msg_type", ln)?.as_str().unwrap_or_default().to_string(),
                    cost: WordCost::values(words),
                    send_time: t,
                    deliver_time: as_u64(&obj, "deliver_at", ln)?,
                });
                env_ids.insert(id, trace.envelopes.len() - 1);
                EventKind::Send(trace.envelopes.len() - 1)
            }
            "deliver" => {
                let id = as_u64(&obj, "env", ln)?;
                let k = *env_ids
                    .get(&id)
                    .ok_or_else(|| SimError::MalformedTrace(format!("line {ln}: delivery of unsent envelope {id}")))?;
                EventKind::Deliver(k)
            }
            "decide" => {
                trace.outputs.push((proc, t, field(&obj, "value", ln)?.clone()));
                EventKind::Output(trace.outputs.len() - 1)
            }
            "note" => EventKind::Note {
                kind: field(&obj, "note", ln)?.as_str().unwrap_or_default().to_string(),
                detail: obj.get("value").cloned().unwrap_or(Json::Null),
            },
            other => return Err(SimError::MalformedTrace(format!("line {ln}: unknown event kind `{other}`"))),
        };
        trace.events.push(Event { t, proc, kind });
    }
    Ok(TraceFile { scenario: head.get("scenario").cloned().unwrap_or(Json::Null), trace })
}
