use std::io::BufRead;
use std::path::Path;

use super::run::{correct_config, dissemination_checks, dissemination_verdict, Runner};
use super::scenario::{Protocol, Scenario};
use super::HarnessError;
use crate::simnet::{check_consensus, check_vector, read_jsonl, Verdict};
use crate::universal::check_lambda_decisions;
use crate::validity::{InputConfiguration, Value};

/// Verdicts recomputed from a trace file.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub scenario: Scenario,
    /// Execution-model violations (late deliveries, phantom deliveries, ...).
    pub structural: Vec<String>,
    pub verdict: Verdict,
    pub checks: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.structural.is_empty() && self.verdict.all_pass() && self.checks.is_empty()
    }
}

/// Reads a JSON-lines trace and checks it against the scenario in its header. Property
/// and Λ files are resolved relative to `base`.
pub fn check_trace<R: BufRead>(input: R, base: &Path, runner: &Runner) -> Result<CheckReport, HarnessError> {
    let file = read_jsonl(input)?;
    let scenario = Scenario::from_value(file.scenario)?;
    let trace = file.trace;
    let structural = trace.validate();
    let proposals = &scenario.proposals;
    let space = scenario.space()?;
    let (verdict, checks) = match scenario.protocol {
        Protocol::Universal(_) => {
            let cfg = runner.universal_config(&scenario, base)?;
            let trace = trace
                .try_map_outputs(|o| o.as_i64().map(Value))
                .map_err(|o| HarnessError::Schema(format!("decision {o} is not a value")))?;
            let c = correct_config(&trace, proposals);
            let v = check_consensus(&trace, &cfg.property, &c, &space, runner.budget())?;
            (v, check_lambda_decisions(&trace, &cfg.lambda))
        }
        Protocol::Vector(_) => {
            let trace = trace
                .try_map_outputs(|o| serde_json::from_value::<InputConfiguration>(o.clone()).ok())
                .map_err(|o| HarnessError::Schema(format!("decision {o} is not a vector")))?;
            let c = correct_config(&trace, proposals);
            (check_vector(&trace, &c), Vec::new())
        }
        Protocol::Dissemination => (dissemination_verdict(&trace), dissemination_checks(&trace)),
    };
    Ok(CheckReport { scenario, structural, verdict, checks })
}
