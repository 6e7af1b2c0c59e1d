use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::scenario::{Protocol, Scenario};
use super::HarnessError;
use crate::crypto::Keyring;
use crate::simnet::{
    check_consensus, check_vector, count_metrics, make_adversary, write_metrics_csv, Adversary, AdversaryKind,
    MetricsReport, MetricsRow, NetworkParams, Node, Simulation, Trace, Verdict, WordAccounting,
};
use crate::universal::{check_lambda_decisions, Universal, UniversalConfig};
use crate::validity::{
    Budget, InputConfiguration, LambdaTable, ProcessId, SystemParams, Value, ValueSpace,
};
use crate::vector_consensus::{
    AuthVector, DisseminationNode, LowCommVector, NonAuthVector, SignedProposal, SignedVector, VectorBackend,
    VectorContext,
};

/// Everything one run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub name: String,
    pub protocol: Protocol,
    pub faulty: BTreeSet<ProcessId>,
    pub verdict: Verdict,
    /// Failed protocol-specific checks (Λ cross-check, dissemination redundancy, ...).
    pub checks: Vec<String>,
    pub metrics: MetricsReport,
    pub row: MetricsRow,
    pub canonical: bool,
    /// JSON-lines trace, when requested.
    pub trace: Option<Vec<u8>>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict.all_pass() && self.checks.is_empty()
    }

    pub fn metrics_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_metrics_csv(&mut out, std::slice::from_ref(&self.row)).expect("in-memory write");
        out
    }

    /// One line: verdict flags plus any failed check.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}", self.name, self.verdict);
        for c in self.checks.iter().chain(&self.verdict.details) {
            s.push_str("\n  ");
            s.push_str(c);
        }
        s
    }
}

/// Runs scenarios, sharing Λ tables between runs with the same parameters and property.
pub struct Runner {
    budget: Budget,
    keep_trace: bool,
    lambdas: Mutex<HashMap<String, Arc<LambdaTable>>>,
}

impl Runner {
    pub fn new(budget: Budget) -> Self {
        Runner { budget, keep_trace: true, lambdas: Mutex::new(HashMap::new()) }
    }

    pub fn keep_trace(mut self, keep: bool) -> Self {
        self.keep_trace = keep;
        self
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// The universal config of a scenario, from its shipped table or computed.
    pub fn universal_config(&self, sc: &Scenario, base: &Path) -> Result<UniversalConfig, HarnessError> {
        let Protocol::Universal(backend) = sc.protocol else {
            return Err(HarnessError::Schema(format!("protocol {} is not universal", sc.protocol)));
        };
        let property = sc.load_property(base)?.expect("validated: universal has a property");
        let params = sc.params()?;
        let space = sc.space()?;
        let key = format!("{}/{}/{:?}/{:?}/{:?}", sc.n, sc.t, sc.values, property, sc.lambda.as_ref().map(|l| base.join(l)));
        if let Some(table) = self.lambdas.lock().expect("lambda cache").get(&key) {
            return Ok(UniversalConfig { property, lambda: table.clone(), backend });
        }
        let cfg = match sc.load_lambda(base)? {
            Some(table) => UniversalConfig::with_table(property, table, &space, backend, self.budget)?,
            None => UniversalConfig::new(property, params, &space, backend, self.budget)?,
        };
        self.lambdas.lock().expect("lambda cache").insert(key, cfg.lambda.clone());
        Ok(cfg)
    }

    pub fn run(&self, sc: &Scenario, base: &Path) -> Result<RunReport, HarnessError> {
        sc.validate()?;
        let params = sc.params()?;
        let space = sc.space()?;
        let adv = make_adversary(&sc.adversary, params, sc.faulty)?;
        let mut net = sc.net();
        if let Some(g) = adv.gst_override {
            net.gst = g;
        }
        let keyring = Keyring::generate(params, sc.crypto_mode, sc.seed);
        let ctx = VectorContext::new(params, space.clone(), keyring, sc.delta).with_binary(sc.binary);
        let setup = Setup { sc, params, space: &space, adv: &adv, net };

        match sc.protocol {
            Protocol::Universal(backend) => {
                let cfg = self.universal_config(sc, base)?;
                let lambda = cfg.lambda.clone();
                let trace = match backend {
                    VectorBackend::Auth => setup.sim(|p, v| Universal::new(AuthVector::new(ctx.clone(), p, v), lambda.clone())),
                    VectorBackend::Nonauth => setup.sim(|p, v| Universal::new(NonAuthVector::new(ctx.clone(), p, v), lambda.clone())),
                    VectorBackend::Lowcomm => setup.sim(|p, v| Universal::new(LowCommVector::new(ctx.clone(), p, v), lambda.clone())),
                };
                let c = correct_config(&trace, &sc.proposals);
                let verdict = check_consensus(&trace, &cfg.property, &c, &space, self.budget)?;
                let mut checks = check_lambda_decisions(&trace, &cfg.lambda);
                checks.extend(lower_bound_check(sc, &trace));
                Ok(self.report(sc, trace, verdict, checks))
            }
            Protocol::Vector(backend) => {
                let trace = match backend {
                    VectorBackend::Auth => setup.sim(|p, v| AuthVector::new(ctx.clone(), p, v)),
                    VectorBackend::Nonauth => setup.sim(|p, v| NonAuthVector::new(ctx.clone(), p, v)),
                    VectorBackend::Lowcomm => setup.sim(|p, v| LowCommVector::new(ctx.clone(), p, v)),
                };
                let c = correct_config(&trace, &sc.proposals);
                let verdict = check_vector(&trace, &c);
                let checks = lower_bound_check(sc, &trace).into_iter().collect();
                Ok(self.report(sc, trace, verdict, checks))
            }
            Protocol::Dissemination => {
                let vectors = staggered_vectors(&ctx, &sc.proposals);
                let trace = setup.sim(|p, v| {
                    let mut sv = vectors[p.index()].clone();
                    if sv.vector.get(p) != Some(v) {
                        // an equivocating copy disseminates its own proposal
                        sv = own_vector(&ctx, p, v, &sc.proposals);
                    }
                    DisseminationNode::new(ctx.clone(), p, sv)
                });
                let verdict = dissemination_verdict(&trace);
                let checks = dissemination_checks(&trace);
                Ok(self.report(sc, trace, verdict, checks))
            }
        }
    }

    fn report<O: Serialize>(&self, sc: &Scenario, trace: Trace<O>, verdict: Verdict, checks: Vec<String>) -> RunReport {
        let acc = WordAccounting::default();
        let metrics = count_metrics(&trace, &acc);
        let row = MetricsRow {
            n: sc.n,
            t: sc.t,
            protocol: sc.protocol.to_string(),
            adversary: sc.adversary.to_string(),
            seed: sc.seed,
            msgs_after_gst: metrics.msgs_after_gst,
            words_after_gst: metrics.words_after_gst,
            latency: metrics.latency,
        };
        let trace_bytes = self.keep_trace.then(|| {
            let mut buf = Vec::new();
            let header = serde_json::to_value(sc).expect("scenario serializes");
            trace.write_jsonl(&mut buf, &header, &acc).expect("in-memory write");
            buf
        });
        RunReport {
            name: sc.name.clone(),
            protocol: sc.protocol,
            faulty: trace.faulty.clone(),
            verdict,
            checks,
            metrics,
            row,
            canonical: trace.is_canonical(),
            trace: trace_bytes,
        }
    }
}

/// Runs one scenario with a fresh runner, keeping the trace.
pub fn run_scenario(sc: &Scenario, base: &Path, budget: Budget) -> Result<RunReport, HarnessError> {
    Runner::new(budget).run(sc, base)
}

struct Setup<'a> {
    sc: &'a Scenario,
    params: SystemParams,
    space: &'a ValueSpace,
    adv: &'a Adversary,
    net: NetworkParams,
}

impl Setup<'_> {
    fn sim<N, F>(&self, make: F) -> Trace<N::Output>
    where
        N: Node + 'static,
        F: FnMut(ProcessId, Value) -> N,
    {
        let nodes = self.adv.build(self.params, self.space, &self.sc.proposals, make);
        Simulation::new(self.params, self.net, self.sc.schedule.clone(), nodes, self.adv.faulty.clone(), self.sc.max_ticks)
            .run()
    }
}

/// The correct processes' proposals.
pub fn correct_config<O>(trace: &Trace<O>, proposals: &[Value]) -> InputConfiguration {
    InputConfiguration::new(trace.correct().map(|p| (p, proposals[p.index()]))).expect("distinct processes")
}

/// Under the lower-bound adversary the correct processes must send more than
/// `ceil(t/2)^2` messages.
fn lower_bound_check<O>(sc: &Scenario, trace: &Trace<O>) -> Option<String> {
    if sc.adversary != AdversaryKind::LowerBound {
        return None;
    }
    let half = sc.t.div_ceil(2) as u64;
    let msgs = count_metrics(trace, &WordAccounting::default()).msgs_after_gst;
    (msgs <= half * half).then(|| format!("correct processes sent {msgs} messages, not above ceil(t/2)^2 = {}", half * half))
}

/// Process `P_i` disseminates the signed proposals of `P_i, P_{i+1}, ...` (wrapping), so
/// the processes hold different vectors.
fn staggered_vectors(ctx: &VectorContext, proposals: &[Value]) -> Vec<SignedVector> {
    ctx.params.processes().map(|p| own_vector(ctx, p, proposals[p.index()], proposals)).collect()
}

fn own_vector(ctx: &VectorContext, p: ProcessId, v: Value, proposals: &[Value]) -> SignedVector {
    let sps: Vec<SignedProposal> = (0..ctx.quorum())
        .map(|k| {
            let q = ProcessId::from_index((p.index() + k) % ctx.n());
            let value = if q == p { v } else { proposals[q.index()] };
            SignedProposal::sign(&ctx.keyring, q, value)
        })
        .collect();
    SignedVector::from_proposals(&sps)
}

/// Termination only: processes may acquire different digests.
pub fn dissemination_verdict<O>(trace: &Trace<O>) -> Verdict {
    let undecided: Vec<ProcessId> = trace.correct().filter(|p| trace.decision(*p).is_none()).collect();
    let mut v = Verdict {
        termination: undecided.is_empty(),
        agreement: true,
        single_decision: trace.correct().all(|p| trace.outputs_of(p).count() <= 1),
        horizon_exceeded: !undecided.is_empty(),
        ..Verdict::default()
    };
    if !undecided.is_empty() {
        v.details.push(format!("never acquired: {undecided:?}"));
    }
    v
}

/// Redundancy (every acquired digest cached by at least `t + 1` correct processes), no
/// slow broadcast after acquiring, and at most one correct process sending more than
/// three slow-broadcast messages after GST.
pub fn dissemination_checks<O>(trace: &Trace<O>) -> Vec<String> {
    let mut out = Vec::new();
    let t = trace.params.t();
    let acquired: BTreeSet<String> =
        trace.notes("acquire").filter_map(|(_, _, d)| d["digest"].as_str().map(str::to_string)).collect();
    for digest in &acquired {
        let holders: BTreeSet<ProcessId> = trace
            .notes("cache")
            .filter(|(_, p, c)| trace.is_correct(*p) && c["digest"].as_str() == Some(digest))
            .map(|(_, p, _)| p)
            .collect();
        if holders.len() <= t {
            out.push(format!("digest {digest} cached by only {} correct processes", holders.len()));
        }
    }
    let mut chatty = 0;
    for p in trace.correct() {
        let acquired_at = trace.notes("acquire").find(|(_, q, _)| *q == p).map(|(at, _, _)| at);
        let slow: Vec<u64> =
            trace.sent_with_tag("SLOW_BROADCAST").filter(|e| e.sender == p).map(|e| e.send_time).collect();
        if let Some(at) = acquired_at {
            if slow.iter().any(|s| *s > at) {
                out.push(format!("{p} slow-broadcast after acquiring at {at}"));
            }
        }
        if slow.iter().filter(|s| **s >= trace.gst).count() > 3 {
            chatty += 1;
        }
    }
    if chatty > 1 {
        out.push(format!("{chatty} correct processes sent more than 3 slow-broadcast messages after GST"));
    }
    out
}
