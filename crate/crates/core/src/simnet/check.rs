use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::trace::Trace;
use crate::validity::{
    sim_set, Budget, InputConfiguration, ValidityError, ValidityProperty, Value, ValueSpace,
};

/// Consensus properties of one trace. `None` means the check does not apply.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub termination: bool,
    pub agreement: bool,
    pub validity: Option<bool>,
    pub canonical_similarity: Option<bool>,
    pub single_decision: bool,
    pub horizon_exceeded: bool,
    pub details: Vec<String>,
}

impl Verdict {
    pub fn all_pass(&self) -> bool {
        self.termination
            && self.agreement
            && self.single_decision
            && self.validity != Some(false)
            && self.canonical_similarity != Some(false)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        let opt = |b: Option<bool>| b.map_or("n/a", flag);
        write!(
            f,
            "termination={} agreement={} validity={} canonical_similarity={} single_decision={}",
            flag(self.termination),
            flag(self.agreement),
            opt(self.validity),
            opt(self.canonical_similarity),
            flag(self.single_decision)
        )
    }
}

/// Termination, agreement and single-decision over the correct processes' outputs.
fn common<O: PartialEq + fmt::Debug>(trace: &Trace<O>) -> (Verdict, Vec<&O>) {
    let mut v = Verdict { single_decision: true, ..Verdict::default() };
    let decisions = trace.decisions();
    let mut decided = Vec::new();
    let mut undecided = Vec::new();
    for p in trace.correct() {
        match decisions[p.index()] {
            Some((o, _)) => decided.push(o),
            None => undecided.push(p),
        }
        if trace.outputs_of(p).count() > 1 {
            v.single_decision = false;
            v.details.push(format!("{p} decided more than once"));
        }
    }
    v.termination = undecided.is_empty();
    v.horizon_exceeded = !v.termination;
    if !v.termination {
        v.details.push(format!("undecided at the horizon: {undecided:?}"));
    }
    v.agreement = decided.windows(2).all(|w| w[0] == w[1]);
    if !v.agreement {
        v.details.push(format!("conflicting decisions: {decided:?}"));
    }
    (v, decided)
}

/// Values admissible for every configuration similar to `c`.
pub fn sim_intersection(
    val: &ValidityProperty,
    c: &InputConfiguration,
    space: &ValueSpace,
    params: crate::validity::SystemParams,
    budget: Budget,
) -> Result<BTreeSet<Value>, ValidityError> {
    let mut common = space.output_set();
    for other in sim_set(c, params, space, budget)? {
        let set = val.admissible_set(&other, params, space)?;
        common.retain(|v| set.contains(v));
    }
    Ok(common)
}

/// Checks a trace of value decisions against `val` for the correct processes' input
/// configuration `c`. In canonical traces (faulty processes silent) the decision must also
/// lie in the intersection over `sim(c)`.
pub fn check_consensus(
    trace: &Trace<Value>,
    val: &ValidityProperty,
    c: &InputConfiguration,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Verdict, ValidityError> {
    let (mut v, decided) = common(trace);
    let admissible = val.admissible_set(c, trace.params, space)?;
    let bad: Vec<_> = decided.iter().filter(|d| !admissible.contains(d)).collect();
    v.validity = Some(bad.is_empty());
    if !bad.is_empty() {
        v.details.push(format!("inadmissible decisions {bad:?} for {c}"));
    }
    if trace.is_canonical() {
        let inter = sim_intersection(val, c, space, trace.params, budget)?;
        let off: Vec<_> = decided.iter().filter(|d| !inter.contains(d)).collect();
        v.canonical_similarity = Some(off.is_empty());
        if !off.is_empty() {
            v.details.push(format!("decisions {off:?} outside the sim({c}) intersection {inter:?}"));
        }
    }
    Ok(v)
}

/// Vector validity: each decided vector has `n - t` entries and every entry of a correct
/// process equals its proposal in `c`.
pub fn check_vector(trace: &Trace<InputConfiguration>, c: &InputConfiguration) -> Verdict {
    let (mut v, decided) = common(trace);
    let q = trace.params.quorum();
    let mut ok = true;
    for vec in decided {
        if vec.len() != q {
            ok = false;
            v.details.push(format!("vector {vec} has {} entries, expected {q}", vec.len()));
        }
        for pp in vec.pairs() {
            if trace.is_correct(pp.process) && c.get(pp.process) != Some(pp.value) {
                ok = false;
                v.details.push(format!("vector {vec} misreports correct {}", pp.process));
            }
        }
    }
    v.validity = Some(ok);
    v
}
