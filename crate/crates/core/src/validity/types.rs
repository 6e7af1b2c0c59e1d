use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ValidityError;

/// Identity of a process. Indices are 1-based, matching `P1..Pn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    /// Zero-based slot, for indexing per-process vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        ProcessId(index as u32 + 1)
    }

    /// All process identities `P1..Pn`.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (0..n).map(ProcessId::from_index)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// A proposal or decision value drawn from a finite ordered value set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub i64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of processes and the fault bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    n: usize,
    t: usize,
}

impl SystemParams {
    pub fn new(n: usize, t: usize) -> Result<Self, ValidityError> {
        if t == 0 || t >= n {
            return Err(ValidityError::InvalidParams { n, t });
        }
        Ok(SystemParams { n, t })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `n > 3t`: the regime where non-trivial properties can be solvable.
    pub fn supermajority(&self) -> bool {
        self.n > 3 * self.t
    }

    /// Size of a quorum, `n - t`.
    pub fn quorum(&self) -> usize {
        self.n - self.t
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> + Clone {
        ProcessId::all(self.n)
    }
}

/// Finite input and output value sets, each kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueSpace {
    inputs: Vec<Value>,
    outputs: Vec<Value>,
}

impl ValueSpace {
    pub fn new(inputs: Vec<Value>, outputs: Vec<Value>) -> Result<Self, ValidityError> {
        let sorted = |mut v: Vec<Value>, which: &str| -> Result<Vec<Value>, ValidityError> {
            if v.is_empty() {
                return Err(ValidityError::InvalidSpace(format!("{which} set is empty")));
            }
            v.sort();
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(ValidityError::InvalidSpace(format!(
                    "{which} set has duplicate values"
                )));
            }
            Ok(v)
        };
        Ok(ValueSpace {
            inputs: sorted(inputs, "input")?,
            outputs: sorted(outputs, "output")?,
        })
    }

    /// `V_I = V_O = values`.
    pub fn symmetric(values: Vec<Value>) -> Result<Self, ValidityError> {
        Self::new(values.clone(), values)
    }

    /// `{0, 1}` on both sides.
    pub fn binary() -> Self {
        Self::symmetric(vec![Value(0), Value(1)]).expect("binary space is well formed")
    }

    pub fn inputs(&self) -> &[Value] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Value] {
        &self.outputs
    }

    pub fn is_input(&self, v: Value) -> bool {
        self.inputs.binary_search(&v).is_ok()
    }

    pub fn is_output(&self, v: Value) -> bool {
        self.outputs.binary_search(&v).is_ok()
    }

    pub fn output_set(&self) -> BTreeSet<Value> {
        self.outputs.iter().copied().collect()
    }
}

/// A single `(P, v)` entry of an input configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessProposal {
    pub process: ProcessId,
    pub value: Value,
}

/// An assignment of proposals to a set of distinct processes, sorted by process.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InputConfiguration {
    pairs: Vec<ProcessProposal>,
}

impl InputConfiguration {
    /// Builds a configuration from pairs in any order; rejects repeated processes.
    pub fn new(pairs: impl IntoIterator<Item = (ProcessId, Value)>) -> Result<Self, ValidityError> {
        let mut pairs: Vec<ProcessProposal> = pairs
            .into_iter()
            .map(|(process, value)| ProcessProposal { process, value })
            .collect();
        pairs.sort();
        if pairs.windows(2).any(|w| w[0].process == w[1].process) {
            return Err(ValidityError::InvalidConfig(
                "process appears more than once".into(),
            ));
        }
        if pairs.iter().any(|p| p.process.0 == 0) {
            return Err(ValidityError::InvalidConfig("process index 0".into()));
        }
        Ok(InputConfiguration { pairs })
    }

    /// Convenience for tests and examples: `from_slice(&[(1, 0), (2, 1)])`.
    pub fn from_slice(pairs: &[(u32, i64)]) -> Result<Self, ValidityError> {
        Self::new(pairs.iter().map(|&(p, v)| (ProcessId(p), Value(v))))
    }

    /// Checks size bounds, process range and membership of values in `V_I`.
    pub fn validate(&self, params: SystemParams, space: &ValueSpace) -> Result<(), ValidityError> {
        let len = self.pairs.len();
        if len < params.quorum() || len > params.n() {
            return Err(ValidityError::InvalidConfig(format!(
                "{self} has {len} pairs, expected between {} and {}",
                params.quorum(),
                params.n()
            )));
        }
        for pp in &self.pairs {
            if pp.process.0 as usize > params.n() {
                return Err(ValidityError::InvalidConfig(format!(
                    "{} is outside 1..={}",
                    pp.process,
                    params.n()
                )));
            }
            if !space.is_input(pp.value) {
                return Err(ValidityError::InvalidConfig(format!(
                    "value {} of {} is not an input value",
                    pp.value, pp.process
                )));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[ProcessProposal] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.pairs.iter().map(|p| p.process)
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        self.pairs.iter().map(|p| p.value)
    }

    /// `c[i]`: the proposal of `process`, if it is part of the configuration.
    pub fn get(&self, process: ProcessId) -> Option<Value> {
        self.pairs
            .binary_search_by_key(&process, |p| p.process)
            .ok()
            .map(|i| self.pairs[i].value)
    }

    pub fn contains(&self, process: ProcessId) -> bool {
        self.get(process).is_some()
    }

    /// The common value if every pair proposes the same one.
    pub fn unanimous(&self) -> Option<Value> {
        let first = self.pairs.first()?.value;
        self.pairs.iter().all(|p| p.value == first).then_some(first)
    }

    /// Compact form used in CSV files: `1:0 2:1 3:0`.
    pub fn to_compact(&self) -> String {
        self.pairs
            .iter()
            .map(|p| format!("{}:{}", p.process.0, p.value.0))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for InputConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({},{})", p.process, p.value)?;
        }
        write!(f, "]")
    }
}

impl FromStr for InputConfiguration {
    type Err = ValidityError;

    /// Parses the compact form produced by [`InputConfiguration::to_compact`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for item in s.split_whitespace() {
            let (p, v) = item
                .split_once(':')
                .ok_or_else(|| ValidityError::InvalidConfig(format!("bad pair `{item}`")))?;
            let p: u32 = p
                .parse()
                .map_err(|_| ValidityError::InvalidConfig(format!("bad process `{p}`")))?;
            let v: i64 = v
                .parse()
                .map_err(|_| ValidityError::InvalidConfig(format!("bad value `{v}`")))?;
            pairs.push((ProcessId(p), Value(v)));
        }
        InputConfiguration::new(pairs)
    }
}

// Serialized as `[[process, value], ...]`, the layout used by property and scenario files.
impl Serialize for InputConfiguration {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<(u32, i64)> = self.pairs.iter().map(|p| (p.process.0, p.value.0)).collect();
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InputConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: Vec<(u32, i64)> = Vec::deserialize(deserializer)?;
        InputConfiguration::from_slice(&raw).map_err(serde::de::Error::custom)
    }
}

/// Similarity: at least one common process, and every common process proposes the same
/// value in both configurations.
pub fn similar(c1: &InputConfiguration, c2: &InputConfiguration) -> bool {
    let (a, b) = (c1.pairs(), c2.pairs());
    let (mut i, mut j) = (0, 0);
    let mut common = false;
    while i < a.len() && j < b.len() {
        match a[i].process.cmp(&b[j].process) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].value != b[j].value {
                    return false;
                }
                common = true;
                i += 1;
                j += 1;
            }
        }
    }
    common
}

/// Compatibility: at most `t` common processes, and each side has a process the other lacks.
pub fn compatible(c1: &InputConfiguration, c2: &InputConfiguration, params: SystemParams) -> bool {
    let common = c1.processes().filter(|p| c2.contains(*p)).count();
    common <= params.t() && c1.len() > common && c2.len() > common
}
