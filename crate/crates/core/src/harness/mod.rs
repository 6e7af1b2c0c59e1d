//! Scenario files, the scenario runner, benchmark sweeps and trace re-checking.

mod bench;
mod check;
mod run;
mod scenario;

pub use bench::{bench, doubling_ratios, quadratic_fit, write_bench_csv, BenchRow, BenchSpec, DoublingRatio, BENCH_COLUMNS, BENCH_HEADER};
pub use check::{check_trace, CheckReport};
pub use run::{correct_config, dissemination_checks, dissemination_verdict, run_scenario, RunReport, Runner};
pub use scenario::{Protocol, Scenario, SCENARIO_SCHEMA, SCENARIO_VERSION};

use thiserror::Error;

use crate::simnet::SimError;
use crate::universal::UniversalError;
use crate::validity::ValidityError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("scenario schema: {0}")]
    Schema(String),
    #[error("scenario version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Io(String),
    #[error("verdict failed: {details}\nscenario:\n{scenario}")]
    VerdictFailed { scenario: String, details: String },
}

impl HarnessError {
    /// Budget exhaustion anywhere below.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            HarnessError::Validity(ValidityError::BudgetExceeded { .. })
                | HarnessError::Universal(UniversalError::Validity(ValidityError::BudgetExceeded { .. }))
        )
    }
}

#[cfg(test)]
mod tests;
