use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::core_consensus::BinaryBackend;
use crate::crypto::CryptoMode;
use crate::simnet::{AdversaryKind, NetworkParams, Schedule, Tick};
use crate::validity::{LambdaTable, SystemParams, ValidityProperty, Value, ValueSpace};
use crate::vector_consensus::VectorBackend;

pub const SCENARIO_SCHEMA: &str = "validus-scenario";
pub const SCENARIO_VERSION: u64 = 1;

/// What the correct processes run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Protocol {
    /// Raw vector consensus; decisions are vectors.
    Vector(VectorBackend),
    /// Universal over a vector consensus; decisions are values.
    Universal(VectorBackend),
    /// Vector dissemination alone; outputs are acquired digests.
    Dissemination,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Vector(b) => write!(f, "{b}"),
            Protocol::Universal(b) => write!(f, "universal:{b}"),
            Protocol::Dissemination => f.write_str("dissemination"),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    /// `auth`, `nonauth`, `lowcomm`, `universal` (over auth), `universal:<backend>`,
    /// `dissemination`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dissemination" => Ok(Protocol::Dissemination),
            "universal" => Ok(Protocol::Universal(VectorBackend::Auth)),
            _ => match s.strip_prefix("universal:") {
                Some(b) => b.parse().map(Protocol::Universal),
                None => s.parse().map(Protocol::Vector),
            },
        }
    }
}

impl TryFrom<String> for Protocol {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Protocol> for String {
    fn from(p: Protocol) -> String {
        p.to_string()
    }
}

/// A complete, reproducible experiment. Files hold every field, so parsing and
/// re-serializing a file gives back the same bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub version: u64,
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub gst: Tick,
    pub delta: Tick,
    pub seed: u64,
    /// Input and output space.
    pub values: Vec<Value>,
    /// Builtin property name, or a property file path ending in `.json` (relative to the
    /// scenario file). Required for universal runs.
    pub property: Option<String>,
    /// Λ table CSV path (relative to the scenario file). Computed when absent.
    pub lambda: Option<String>,
    /// One proposal per process, faulty ones included.
    pub proposals: Vec<Value>,
    pub protocol: Protocol,
    pub binary: BinaryBackend,
    pub adversary: AdversaryKind,
    /// Number of faulty processes for the adversary.
    pub faulty: usize,
    pub schedule: Schedule,
    pub max_ticks: Tick,
    pub crypto_mode: CryptoMode,
}

impl Scenario {
    /// Defaults: binary values, proposals alternating over the values, `t` silent faults,
    /// random schedule, horizon `gst + 200 delta`.
    pub fn new(name: &str, n: usize, t: usize, protocol: Protocol) -> Self {
        let values = vec![Value(0), Value(1)];
        let property = matches!(protocol, Protocol::Universal(_)).then(|| "strong".to_string());
        Scenario {
            schema: SCENARIO_SCHEMA.into(),
            version: SCENARIO_VERSION,
            name: name.into(),
            n,
            t,
            gst: 0,
            delta: 1,
            seed: 0,
            proposals: (0..n).map(|i| values[i % values.len()]).collect(),
            values,
            property,
            lambda: None,
            protocol,
            binary: BinaryBackend::default(),
            adversary: AdversaryKind::Silent,
            faulty: t,
            schedule: Schedule::Random,
            max_ticks: 200,
            crypto_mode: CryptoMode::Fast,
        }
    }

    /// Sets GST and delta and resets the horizon to `gst + 200 delta`.
    pub fn timing(mut self, gst: Tick, delta: Tick) -> Self {
        self.gst = gst;
        self.delta = delta;
        self.max_ticks = gst + 200 * delta;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let raw: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| HarnessError::Schema(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        Self::from_value(raw)
    }

    /// Checks the schema tag and version before the fields.
    pub fn from_value(raw: serde_json::Value) -> Result<Self, HarnessError> {
        if raw.get("schema").and_then(|s| s.as_str()) != Some(SCENARIO_SCHEMA) {
            return Err(HarnessError::Schema(format!("`schema` must be \"{SCENARIO_SCHEMA}\"")));
        }
        let found = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != SCENARIO_VERSION {
            return Err(HarnessError::Version { found, expected: SCENARIO_VERSION });
        }
        let sc: Scenario = serde_json::from_value(raw).map_err(|e| HarnessError::Schema(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with a trailing newline; the bundled files are written this way.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn params(&self) -> Result<SystemParams, HarnessError> {
        Ok(SystemParams::new(self.n, self.t)?)
    }

    pub fn space(&self) -> Result<ValueSpace, HarnessError> {
        Ok(ValueSpace::symmetric(self.values.clone())?)
    }

    pub fn net(&self) -> NetworkParams {
        NetworkParams::new(self.gst, self.delta, self.seed)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let params = self.params()?;
        let space = self.space()?;
        let bad = |m: String| Err(HarnessError::Schema(m));
        if self.delta == 0 {
            return bad("delta must be at least 1".into());
        }
        if self.proposals.len() != self.n {
            return bad(format!("{} proposals for n = {}", self.proposals.len(), self.n));
        }
        if let Some(v) = self.proposals.iter().find(|v| !space.is_input(**v)) {
            return bad(format!("proposal {v} is not in the value space"));
        }
        if self.faulty > params.t() {
            return bad(format!("{} faulty processes exceed t = {}", self.faulty, params.t()));
        }
        if !params.supermajority() {
            return bad(format!("the protocols need n > 3t, got n = {}, t = {}", self.n, self.t));
        }
        if matches!(self.protocol, Protocol::Universal(_)) && self.property.is_none() {
            return bad("universal runs need a `property`".into());
        }
        Ok(())
    }

    /// Resolves the property, reading a file relative to `base` when needed.
    pub fn load_property(&self, base: &Path) -> Result<Option<ValidityProperty>, HarnessError> {
        let Some(p) = &self.property else { return Ok(None) };
        if p.ends_with(".json") {
            let path = base.join(p);
            let text =
                std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            Ok(Some(ValidityProperty::from_json(&text)?))
        } else {
            Ok(Some(ValidityProperty::builtin(p)?))
        }
    }

    pub fn load_lambda(&self, base: &Path) -> Result<Option<LambdaTable>, HarnessError> {
        let Some(p) = &self.lambda else { return Ok(None) };
        let path = base.join(p);
        let file = std::fs::File::open(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Ok(Some(LambdaTable::read_csv(self.params()?, file)?))
    }
}
