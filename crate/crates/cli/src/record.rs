use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use eprsdp::sdp::{DualCheck, SolverSummary};
use eprsdp::{ScenarioSpec, ValidationReport};

/// Machine-readable outcome of one invocation.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictRecord {
    pub format: u32,
    pub command: String,
    pub verdict: String,
    pub level: Option<usize>,
    pub scenario: ScenarioSpec,
    pub tol: f64,
    pub residuals: BTreeMap<String, f64>,
    pub margins: Margins,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    pub artifacts: BTreeMap<String, String>,
    pub wall_time: f64,
    pub tool_version: String,
    pub input_digest: String,
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Margins {
    /// Eigenvalue margin found by the solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualCheck>,
}

impl VerdictRecord {
    pub fn new(command: &str, scenario: ScenarioSpec, level: Option<usize>, tol: f64, input: &[u8]) -> Self {
        VerdictRecord {
            format: eprsdp::io::FORMAT_VERSION,
            command: command.to_string(),
            verdict: "unknown".into(),
            level,
            scenario,
            tol,
            residuals: BTreeMap::new(),
            margins: Margins::default(),
            upper_bound: None,
            primal_value: None,
            reason: None,
            solver: None,
            artifacts: BTreeMap::new(),
            wall_time: 0.0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: digest(input),
        }
    }

    pub fn add_report(&mut self, report: &ValidationReport) {
        for c in &report.checks {
            let r = self.residuals.entry(c.name.clone()).or_insert(0.0);
            *r = r.max(c.residual);
        }
    }

    pub fn add_artifact(&mut self, kind: &str, path: &Path) {
        self.artifacts.insert(kind.to_string(), path.display().to_string());
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
