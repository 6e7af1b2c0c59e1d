use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::{InputConfiguration, SystemParams, Value, ValueSpace};
use super::ValidityError;

/// A validity property: a map from input configurations to nonempty sets of admissible
/// decisions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidityProperty {
    /// Unanimous configurations admit only their common value.
    Strong,
    /// Unanimous configurations containing every process admit only their common value.
    Weak,
    /// The decision must have been proposed by some process of the configuration.
    CorrectProposal,
    /// Always the given value.
    Constant(Value),
    /// Any output between the least and greatest proposal of the configuration.
    Interval,
    /// Explicitly listed admissible sets.
    Table(PropertyTable),
}

/// Explicit property, one admissible set per listed configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropertyTable {
    entries: BTreeMap<InputConfiguration, BTreeSet<Value>>,
}

impl PropertyTable {
    /// Rejects empty admissible sets and configurations listed twice.
    pub fn new(
        entries: impl IntoIterator<Item = (InputConfiguration, BTreeSet<Value>)>,
    ) -> Result<Self, ValidityError> {
        let mut map = BTreeMap::new();
        for (cfg, set) in entries {
            if set.is_empty() {
                return Err(ValidityError::EmptyAdmissible(cfg));
            }
            if map.insert(cfg.clone(), set).is_some() {
                return Err(ValidityError::InvalidProperty(format!(
                    "configuration {cfg} listed twice"
                )));
            }
        }
        Ok(PropertyTable { entries: map })
    }

    pub fn get(&self, c: &InputConfiguration) -> Option<&BTreeSet<Value>> {
        self.entries.get(c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InputConfiguration, &BTreeSet<Value>)> {
        self.entries.iter()
    }
}

impl ValidityProperty {
    /// Short name used in reports and CSV rows.
    pub fn name(&self) -> String {
        match self {
            ValidityProperty::Strong => "strong".into(),
            ValidityProperty::Weak => "weak".into(),
            ValidityProperty::CorrectProposal => "correct_proposal".into(),
            ValidityProperty::Constant(v) => format!("constant:{v}"),
            ValidityProperty::Interval => "interval".into(),
            ValidityProperty::Table(_) => "table".into(),
        }
    }

    /// Parses a builtin name: `strong`, `weak`, `correct_proposal`, `interval`, `constant:<v>`.
    pub fn builtin(name: &str) -> Result<Self, ValidityError> {
        match name {
            "strong" => Ok(ValidityProperty::Strong),
            "weak" => Ok(ValidityProperty::Weak),
            "correct_proposal" => Ok(ValidityProperty::CorrectProposal),
            "interval" => Ok(ValidityProperty::Interval),
            other => match other.strip_prefix("constant:") {
                Some(v) => v
                    .trim()
                    .parse::<i64>()
                    .map(|v| ValidityProperty::Constant(Value(v)))
                    .map_err(|_| ValidityError::InvalidProperty(format!("bad constant `{v}`"))),
                None => Err(ValidityError::InvalidProperty(format!("unknown builtin `{other}`"))),
            },
        }
    }

    /// `val(c)`. Errors if `c` is missing from a table or the admissible set would be empty.
    pub fn admissible_set(
        &self,
        c: &InputConfiguration,
        params: SystemParams,
        space: &ValueSpace,
    ) -> Result<BTreeSet<Value>, ValidityError> {
        let set: BTreeSet<Value> = match self {
            ValidityProperty::Strong => match c.unanimous() {
                Some(v) => single(v, space),
                None => space.output_set(),
            },
            ValidityProperty::Weak => match c.unanimous() {
                Some(v) if c.len() == params.n() => single(v, space),
                _ => space.output_set(),
            },
            ValidityProperty::CorrectProposal => {
                c.values().filter(|v| space.is_output(*v)).collect()
            }
            ValidityProperty::Constant(v) => single(*v, space),
            ValidityProperty::Interval => {
                let lo = c.values().min();
                let hi = c.values().max();
                match (lo, hi) {
                    (Some(lo), Some(hi)) => space
                        .outputs()
                        .iter()
                        .copied()
                        .filter(|v| lo <= *v && *v <= hi)
                        .collect(),
                    _ => BTreeSet::new(),
                }
            }
            ValidityProperty::Table(table) => table
                .get(c)
                .ok_or_else(|| ValidityError::TableMissingEntry(c.clone()))?
                .iter()
                .copied()
                .filter(|v| space.is_output(*v))
                .collect(),
        };
        if set.is_empty() {
            return Err(ValidityError::EmptyAdmissible(c.clone()));
        }
        Ok(set)
    }

    /// Whether `v ∈ val(c)`.
    pub fn admissible(
        &self,
        c: &InputConfiguration,
        v: Value,
        params: SystemParams,
        space: &ValueSpace,
    ) -> Result<bool, ValidityError> {
        Ok(self.admissible_set(c, params, space)?.contains(&v))
    }

    pub fn from_json(text: &str) -> Result<Self, ValidityError> {
        let file: PropertyFile = serde_json::from_str(text).map_err(|e| {
            ValidityError::MalformedFile(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        file.try_into()
    }

    pub fn to_file(&self) -> PropertyFile {
        let mut file = PropertyFile {
            kind: String::new(),
            constant: None,
            table: None,
        };
        match self {
            ValidityProperty::Strong => file.kind = "strong".into(),
            ValidityProperty::Weak => file.kind = "weak".into(),
            ValidityProperty::CorrectProposal => file.kind = "correct_proposal".into(),
            ValidityProperty::Interval => file.kind = "interval".into(),
            ValidityProperty::Constant(v) => {
                file.kind = "constant".into();
                file.constant = Some(*v);
            }
            ValidityProperty::Table(t) => {
                file.kind = "table".into();
                file.table = Some(
                    t.iter()
                        .map(|(c, s)| TableEntry {
                            config: c.clone(),
                            admissible: s.iter().copied().collect(),
                        })
                        .collect(),
                );
            }
        }
        file
    }
}

fn single(v: Value, space: &ValueSpace) -> BTreeSet<Value> {
    if space.is_output(v) {
        BTreeSet::from([v])
    } else {
        BTreeSet::new()
    }
}

/// On-disk JSON layout of a validity property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<TableEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub config: InputConfiguration,
    pub admissible: Vec<Value>,
}

impl TryFrom<PropertyFile> for ValidityProperty {
    type Error = ValidityError;

    fn try_from(file: PropertyFile) -> Result<Self, Self::Error> {
        let prop = match file.kind.as_str() {
            "constant" => ValidityProperty::Constant(file.constant.ok_or_else(|| {
                ValidityError::MalformedFile("kind `constant` requires field `constant`".into())
            })?),
            "table" => {
                let entries = file.table.ok_or_else(|| {
                    ValidityError::MalformedFile("kind `table` requires field `table`".into())
                })?;
                ValidityProperty::Table(PropertyTable::new(
                    entries
                        .into_iter()
                        .map(|e| (e.config, e.admissible.into_iter().collect())),
                )?)
            }
            other => ValidityProperty::builtin(other).map_err(|_| {
                ValidityError::MalformedFile(format!("unknown property kind `{other}`"))
            })?,
        };
        Ok(prop)
    }
}

impl Serialize for ValidityProperty {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ValidityProperty {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        PropertyFile::deserialize(deserializer)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}
