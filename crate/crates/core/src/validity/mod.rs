//! Input configurations, validity properties, and their classification.
//!
//! Everything here is a pure function over finite value spaces: properties are evaluated
//! by enumerating the set `I` of input configurations (all assignments of proposals to
//! between `n - t` and `n` distinct processes).

mod classify;
mod enumerate;
mod property;
mod types;

pub use classify::{
    check_trivial, classify, compute_lambda, compute_lambda_with, ClassificationReport, LambdaOutcome,
    LambdaTable, Verdict,
};
pub use enumerate::{all_configs, count_configs, enumerate_configs, sim_set, Budget, BUDGET_ENV};
pub use property::{PropertyFile, PropertyTable, TableEntry, ValidityProperty};
pub use types::{
    compatible, similar, InputConfiguration, ProcessId, ProcessProposal, SystemParams, Value, ValueSpace,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidityError {
    #[error("invalid system parameters n={n}, t={t}: need 0 < t < n")]
    InvalidParams { n: usize, t: usize },
    #[error("invalid value space: {0}")]
    InvalidSpace(String),
    #[error("invalid input configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid validity property: {0}")]
    InvalidProperty(String),
    #[error("enumeration of {count} configurations exceeds the budget of {cap}")]
    BudgetExceeded { count: u128, cap: u64 },
    #[error("property table has no entry for {0}")]
    TableMissingEntry(InputConfiguration),
    #[error("property admits no value for {0}")]
    EmptyAdmissible(InputConfiguration),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("i/o error: {0}")]
    Io(String),
}
