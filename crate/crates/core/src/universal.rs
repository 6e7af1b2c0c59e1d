//! Consensus with any solvable non-trivial validity property: agree on a vector of
//! `n - t` process-proposal pairs, then decide Λ of it.

use std::sync::Arc;

use serde_json::json;
use thiserror::Error;

use crate::simnet::{sim_intersection, Env, Node, Step, Trace};
use crate::validity::{
    compute_lambda, Budget, InputConfiguration, LambdaOutcome, LambdaTable, ProcessId, SystemParams, ValidityError,
    ValidityProperty, Value, ValueSpace,
};
use crate::vector_consensus::VectorBackend;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniversalError {
    #[error("lambda undefined: {0}")]
    LambdaUndefined(String),
    #[error(transparent)]
    Validity(#[from] ValidityError),
}

/// Property, its Λ table and the vector consensus underneath. Every process of a run
/// shares one config.
#[derive(Clone, Debug)]
pub struct UniversalConfig {
    pub property: ValidityProperty,
    pub lambda: Arc<LambdaTable>,
    pub backend: VectorBackend,
}

impl UniversalConfig {
    /// Computes Λ, refusing properties without one (and any `n <= 3t`).
    pub fn new(
        property: ValidityProperty,
        params: SystemParams,
        space: &ValueSpace,
        backend: VectorBackend,
        budget: Budget,
    ) -> Result<Self, UniversalError> {
        if !params.supermajority() {
            return Err(UniversalError::LambdaUndefined(format!(
                "n = {} <= 3t = {}",
                params.n(),
                3 * params.t()
            )));
        }
        match compute_lambda(&property, params, space, budget)? {
            LambdaOutcome::Table(table) => Ok(UniversalConfig { property, lambda: Arc::new(table), backend }),
            LambdaOutcome::Counterexample(c) => Err(UniversalError::LambdaUndefined(format!(
                "{} has no value admissible in every configuration similar to {c}",
                property.name()
            ))),
        }
    }

    /// Uses a precomputed table after checking that it covers every `(n - t)`-sized
    /// configuration and that each entry is admissible in all similar configurations.
    pub fn with_table(
        property: ValidityProperty,
        table: LambdaTable,
        space: &ValueSpace,
        backend: VectorBackend,
        budget: Budget,
    ) -> Result<Self, UniversalError> {
        let params = table.params();
        if !params.supermajority() {
            return Err(UniversalError::LambdaUndefined(format!("n = {} <= 3t = {}", params.n(), 3 * params.t())));
        }
        if !table.covers(space, budget)? {
            return Err(UniversalError::LambdaUndefined("table does not cover every vector".into()));
        }
        for (c, v) in table.iter() {
            if !sim_intersection(&property, c, space, params, budget)?.contains(&v) {
                return Err(UniversalError::LambdaUndefined(format!(
                    "table maps {c} to {v}, which some similar configuration does not admit"
                )));
            }
        }
        Ok(UniversalConfig { property, lambda: Arc::new(table), backend })
    }

    pub fn params(&self) -> SystemParams {
        self.lambda.params()
    }
}

/// Wraps a vector-consensus process and decides Λ of its decision.
pub struct Universal<N> {
    inner: N,
    lambda: Arc<LambdaTable>,
    decided: bool,
}

impl<N> Universal<N> {
    pub fn new(inner: N, lambda: Arc<LambdaTable>) -> Self {
        Universal { inner, lambda, decided: false }
    }
}

impl<N: Node<Output = InputConfiguration>> Universal<N> {
    fn map(&mut self, s: Step<N::Msg, N::Timer, InputConfiguration>) -> Step<N::Msg, N::Timer, Value> {
        let halt = s.halt;
        let (mut out, vectors) = s.lift(|m| m, |t| t);
        for vector in vectors {
            if self.decided {
                continue;
            }
            match self.lambda.get(&vector) {
                Some(v) => {
                    self.decided = true;
                    out.note("universal_decide", json!({ "vector": vector.to_compact(), "value": v.0 }));
                    out.output(v);
                }
                None => {
                    out.note("lambda_missing", json!({ "vector": vector.to_compact() }));
                }
            }
        }
        out.halt = halt;
        out
    }
}

impl<N: Node<Output = InputConfiguration>> Node for Universal<N> {
    type Msg = N::Msg;
    type Timer = N::Timer;
    type Output = Value;

    fn start(&mut self, env: &Env) -> Step<N::Msg, N::Timer, Value> {
        let s = self.inner.start(env);
        self.map(s)
    }

    fn on_message(&mut self, env: &Env, from: ProcessId, msg: N::Msg) -> Step<N::Msg, N::Timer, Value> {
        let s = self.inner.on_message(env, from, msg);
        self.map(s)
    }

    fn on_timer(&mut self, env: &Env, timer: N::Timer) -> Step<N::Msg, N::Timer, Value> {
        let s = self.inner.on_timer(env, timer);
        self.map(s)
    }
}

/// Cross-checks a trace: every correct decision is announced by a `universal_decide` note
/// whose value is Λ of the vector that the back end decided at the same process.
/// Returns the mismatches found.
pub fn check_lambda_decisions<O>(trace: &Trace<O>, lambda: &LambdaTable) -> Vec<String> {
    let mut problems = Vec::new();
    for p in trace.correct() {
        let vector = trace
            .notes("vector_decide")
            .find(|(_, q, _)| *q == p)
            .and_then(|(_, _, d)| d["vector"].as_str().map(str::to_string));
        let uni = trace.notes("universal_decide").find(|(_, q, _)| *q == p).map(|(_, _, d)| d.clone());
        match (vector, uni) {
            (None, None) => {}
            (Some(vec), Some(u)) => {
                let parsed: Option<InputConfiguration> = vec.parse().ok();
                let expected = parsed.as_ref().and_then(|c| lambda.get(c));
                if u["vector"].as_str() != Some(vec.as_str()) {
                    problems.push(format!("{p}: universal used {} but the back end decided {vec}", u["vector"]));
                } else if expected.map(|v| v.0) != u["value"].as_i64() {
                    problems.push(format!("{p}: decided {} but lambda({vec}) = {expected:?}", u["value"]));
                }
            }
            (Some(vec), None) => problems.push(format!("{p}: back end decided {vec} without a universal decision")),
            (None, Some(u)) => problems.push(format!("{p}: universal decision {u} without a back-end vector")),
        }
    }
    problems
}
