use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::Serialize;

use super::enumerate::{all_configs, enumerate_configs, similar_configs, Budget};
use super::property::ValidityProperty;
use super::types::{InputConfiguration, SystemParams, Value, ValueSpace};
use super::ValidityError;

/// Λ: one output value per configuration of `I_{n-t}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaTable {
    params: SystemParams,
    entries: BTreeMap<InputConfiguration, Value>,
}

impl LambdaTable {
    pub fn new(params: SystemParams, entries: BTreeMap<InputConfiguration, Value>) -> Self {
        LambdaTable { params, entries }
    }

    pub fn params(&self) -> SystemParams {
        self.params
    }

    pub fn get(&self, c: &InputConfiguration) -> Option<Value> {
        self.entries.get(c).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InputConfiguration, Value)> {
        self.entries.iter().map(|(c, v)| (c, *v))
    }

    /// Checks that the table covers every configuration of `I_{n-t}` over `space`.
    pub fn covers(&self, space: &ValueSpace, budget: Budget) -> Result<bool, ValidityError> {
        let q = self.params.quorum();
        let configs = enumerate_configs(self.params, space, q..=q, budget)?;
        Ok(configs.len() == self.entries.len() && configs.iter().all(|c| self.entries.contains_key(c)))
    }

    /// CSV with columns `config_id,config,lambda_value`; rows in canonical configuration order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ValidityError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["config_id", "config", "lambda_value"])
            .map_err(|e| ValidityError::Io(e.to_string()))?;
        for (id, (cfg, v)) in self.canonical_rows().enumerate() {
            w.write_record([id.to_string(), cfg.to_compact(), v.0.to_string()])
                .map_err(|e| ValidityError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| ValidityError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(params: SystemParams, input: R) -> Result<Self, ValidityError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| ValidityError::MalformedFile(e.to_string()))?;
        if headers != vec!["config_id", "config", "lambda_value"] {
            return Err(ValidityError::MalformedFile(format!(
                "unexpected lambda CSV header {headers:?}"
            )));
        }
        let mut entries = BTreeMap::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| ValidityError::MalformedFile(e.to_string()))?;
            let at = |what: &str| ValidityError::MalformedFile(format!("row {}: bad {what}", line + 1));
            let cfg: InputConfiguration = rec.get(1).ok_or_else(|| at("config"))?.parse()?;
            if cfg.len() != params.quorum() {
                return Err(at("config size"));
            }
            let v: i64 = rec
                .get(2)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| at("lambda_value"))?;
            entries.insert(cfg, Value(v));
        }
        Ok(LambdaTable { params, entries })
    }

    /// Entries sorted by (process subset, then values), i.e. the enumeration order.
    fn canonical_rows(&self) -> impl Iterator<Item = (&InputConfiguration, Value)> {
        let mut rows: Vec<_> = self.entries.iter().collect();
        rows.sort_by_key(|(c, _)| canonical_key(c));
        rows.into_iter().map(|(c, v)| (c, *v))
    }
}

fn canonical_key(c: &InputConfiguration) -> (usize, Vec<u32>, Vec<Value>) {
    (c.len(), c.processes().map(|p| p.0).collect(), c.values().collect())
}

/// Outcome of computing Λ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LambdaOutcome {
    Table(LambdaTable),
    /// The first configuration (canonical order) whose similar configurations share no
    /// admissible value.
    Counterexample(InputConfiguration),
}

/// Admissible sets of every configuration of `I`, in canonical order.
fn admissible_sets(
    val: &ValidityProperty,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Vec<(InputConfiguration, BTreeSet<Value>)>, ValidityError> {
    all_configs(params, space, budget)?
        .into_iter()
        .map(|c| {
            let set = val.admissible_set(&c, params, space)?;
            Ok((c, set))
        })
        .collect()
}

/// The least output admissible for every configuration of `I`, if any.
pub fn check_trivial(
    val: &ValidityProperty,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<Option<Value>, ValidityError> {
    let mut common = space.output_set();
    for (_, set) in admissible_sets(val, params, space, budget)? {
        common.retain(|v| set.contains(v));
        if common.is_empty() {
            return Ok(None);
        }
    }
    Ok(common.first().copied())
}

/// Λ with the canonical-least choice among common admissible values.
pub fn compute_lambda(
    val: &ValidityProperty,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<LambdaOutcome, ValidityError> {
    compute_lambda_with(val, params, space, budget, |common| {
        *common.first().expect("nonempty intersection")
    })
}

/// Λ with a caller-supplied choice among the (nonempty) common admissible values.
///
/// The chooser must be deterministic: every correct process evaluates the same table.
pub fn compute_lambda_with(
    val: &ValidityProperty,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
    choose: impl Fn(&BTreeSet<Value>) -> Value,
) -> Result<LambdaOutcome, ValidityError> {
    let sets = admissible_sets(val, params, space, budget)?;
    let index: HashMap<&InputConfiguration, &BTreeSet<Value>> = sets.iter().map(|(c, s)| (c, s)).collect();
    let mut entries = BTreeMap::new();
    for (c, _) in sets.iter().filter(|(c, _)| c.len() == params.quorum()) {
        let mut common = space.output_set();
        for other in similar_configs(c, params, space, budget)? {
            common.retain(|v| index[&other].contains(v));
            if common.is_empty() {
                break;
            }
        }
        if common.is_empty() {
            return Ok(LambdaOutcome::Counterexample(c.clone()));
        }
        let chosen = choose(&common);
        if !common.contains(&chosen) {
            return Err(ValidityError::InvalidProperty(format!(
                "lambda chooser picked {chosen}, not common to sim({c})"
            )));
        }
        entries.insert(c.clone(), chosen);
    }
    Ok(LambdaOutcome::Table(LambdaTable::new(params, entries)))
}

/// Final classification of a property.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SolvableTrivial,
    SolvableUniversal,
    Unsolvable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::SolvableTrivial => "solvable_trivial",
            Verdict::SolvableUniversal => "solvable_universal",
            Verdict::Unsolvable => "unsolvable",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassificationReport {
    pub params: SystemParams,
    pub verdict: Verdict,
    pub trivial_witness: Option<Value>,
    pub cs_holds: bool,
    pub cs_counterexample: Option<InputConfiguration>,
    pub lambda: Option<LambdaTable>,
    pub notes: Vec<String>,
}

/// Classifies a property over finite spaces.
///
/// A trivially satisfiable property is `solvable_trivial` in every regime. Otherwise
/// `n <= 3t` is unsolvable, and `n > 3t` is solvable (by Universal) exactly when Λ exists.
pub fn classify(
    val: &ValidityProperty,
    params: SystemParams,
    space: &ValueSpace,
    budget: Budget,
) -> Result<ClassificationReport, ValidityError> {
    let trivial_witness = check_trivial(val, params, space, budget)?;
    let mut report = ClassificationReport {
        params,
        verdict: Verdict::Unsolvable,
        trivial_witness,
        cs_holds: false,
        cs_counterexample: None,
        lambda: None,
        notes: Vec::new(),
    };

    if params.supermajority() {
        match compute_lambda(val, params, space, budget)? {
            LambdaOutcome::Table(table) => {
                report.cs_holds = true;
                report.lambda = Some(table);
            }
            LambdaOutcome::Counterexample(c) => report.cs_counterexample = Some(c),
        }
    }

    report.verdict = if let Some(v) = trivial_witness {
        report.notes.push(format!("every configuration admits {v}; decide it without communication"));
        Verdict::SolvableTrivial
    } else if !params.supermajority() {
        report.notes.push(format!(
            "n = {} <= 3t = {}: only trivial properties are solvable",
            params.n(),
            3 * params.t()
        ));
        Verdict::Unsolvable
    } else if report.cs_holds {
        let half = params.t().div_ceil(2);
        report.notes.push(format!(
            "non-trivial: any solution sends more than ceil(t/2)^2 = {} messages after GST (Omega(t^2)); \
             Universal over authenticated vector consensus sends O(n^2)",
            half * half
        ));
        Verdict::SolvableUniversal
    } else {
        report.notes.push("similarity condition fails: no common admissible value for the counterexample".into());
        Verdict::Unsolvable
    };
    Ok(report)
}
