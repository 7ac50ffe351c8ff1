//! Conic formulation of the hierarchy and interpretation of solver output.
//!
//! Problems are assembled by [`model`] into a backend-neutral
//! [`ConicProblem`], solved through a [`SolverBackend`], and every verdict is
//! rechecked here from the returned primal or dual data.

pub mod certificate;
pub mod ipm;
pub mod membership;
pub mod model;
pub mod problem;
pub mod realify;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assemblage::Assemblage;
use crate::error::Result;
use crate::moment::MomentMatrix;
use crate::report::ValidationReport;

pub use certificate::DualCheck;
pub use ipm::NativeIpm;
pub use membership::{
    bound, bound_with, instrumental_membership, instrumental_membership_with, membership, membership_with,
    recheck_instrumental_dual, recheck_membership_dual,
};
pub use problem::{Cone, ConicProblem, Triplet};
pub use realify::{derealify, realify};

/// Environment variable naming a JSON file with default solver settings.
pub const SETTINGS_ENV: &str = "EPRSDP_SOLVER_CONFIG";

/// Tolerance for primal revalidation and the dual margin.
pub const VERDICT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub feasibility_tol: f64,
    /// Advisory; the native backend is single-threaded.
    pub threads: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { max_iterations: 100, gap_abs: 1e-10, gap_rel: 1e-9, feasibility_tol: 1e-9, threads: 1 }
    }
}

impl SolverSettings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: SolverSettings = serde_json::from_str(&text)?;
        s.check()?;
        Ok(s)
    }

    /// Settings from the file named by [`SETTINGS_ENV`], or the defaults.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(SETTINGS_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn check(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iterations == 0 || !pos(self.gap_abs) || !pos(self.gap_rel) || !pos(self.feasibility_tol) {
            return Err(crate::error::invalid("solver settings must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    InconsistentEqualities,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::MaxIterations => "max-iterations",
            SolverStatus::NumericalFailure => "numerical-failure",
            SolverStatus::InconsistentEqualities => "inconsistent-equalities",
        };
        f.write_str(s)
    }
}

/// Raw backend output. `dual[k]` is the multiplier of cone `k` as a dense
/// symmetric matrix (diagonal for nonnegative cones).
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub status: SolverStatus,
    pub message: String,
    pub theta: Vec<f64>,
    pub dual: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

impl SolverResult {
    pub fn failed(problem: &ConicProblem, status: SolverStatus, message: String) -> Self {
        SolverResult {
            status,
            message,
            theta: vec![0.0; problem.n_vars()],
            dual: problem.cones.iter().map(|c| DMatrix::zeros(c.order(), c.order())).collect(),
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations: 0,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::INFINITY,
            relative_gap: f64::INFINITY,
        }
    }
}

/// A semidefinite solver. Implementations maximise `cᵀθ` over the problem
/// described in [`problem`].
pub trait SolverBackend {
    fn name(&self) -> &str;
    fn solve(&self, problem: &ConicProblem) -> Result<SolverResult>;
}

/// Options shared by every mode.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub settings: SolverSettings,
    /// Primal revalidation tolerance.
    pub tol: f64,
    /// Minimum certified dual margin for an infeasibility verdict.
    pub margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { settings: SolverSettings::default(), tol: VERDICT_TOL, margin: VERDICT_TOL }
    }
}

/// Summary of the solver run attached to every outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverSummary {
    pub backend: String,
    pub status: SolverStatus,
    pub message: String,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub n_vars: usize,
    pub n_equalities: usize,
    pub cone_orders: Vec<usize>,
}

impl SolverSummary {
    fn new(backend: &dyn SolverBackend, p: &ConicProblem, r: &SolverResult) -> Self {
        SolverSummary {
            backend: backend.name().to_string(),
            status: r.status,
            message: r.message.clone(),
            iterations: r.iterations,
            primal_objective: r.primal_objective,
            dual_objective: r.dual_objective,
            n_vars: p.n_vars(),
            n_equalities: p.eq_rows.len(),
            cone_orders: p.cones.iter().map(Cone::order).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    /// A certificate that passed revalidation. `witness` is the free
    /// Bob-with-Input assemblage in instrumental mode.
    Feasible {
        certificate: MomentMatrix,
        report: ValidationReport,
        /// Smallest eigenvalue margin found by the solver.
        t: f64,
        witness: Option<Assemblage>,
        solver: SolverSummary,
    },
    /// A dual certificate that passed the independent recheck.
    Infeasible { dual: Vec<DMatrix<f64>>, check: DualCheck, solver: SolverSummary },
    /// No claim.
    Unknown {
        reason: String,
        report: Option<ValidationReport>,
        check: Option<DualCheck>,
        solver: Option<SolverSummary>,
    },
}

impl SolveOutcome {
    pub fn verdict(&self) -> &'static str {
        match self {
            SolveOutcome::Feasible { .. } => "feasible",
            SolveOutcome::Infeasible { .. } => "infeasible",
            SolveOutcome::Unknown { .. } => "unknown",
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SolveOutcome::Infeasible { .. })
    }

    pub fn certificate(&self) -> Option<&MomentMatrix> {
        match self {
            SolveOutcome::Feasible { certificate, .. } => Some(certificate),
            _ => None,
        }
    }

    pub fn solver(&self) -> Option<&SolverSummary> {
        match self {
            SolveOutcome::Feasible { solver, .. } | SolveOutcome::Infeasible { solver, .. } => Some(solver),
            SolveOutcome::Unknown { solver, .. } => solver.as_ref(),
        }
    }
}

/// Result of maximising a steering functional.
#[derive(Clone, Debug)]
pub struct BoundOutcome {
    /// Upper bound certified from the dual; `None` when the recheck failed.
    pub upper_bound: Option<f64>,
    /// Functional value at the returned optimiser.
    pub primal_value: f64,
    pub optimizer: Option<Assemblage>,
    pub certificate: Option<MomentMatrix>,
    /// Primal residuals of the optimiser.
    pub report: ValidationReport,
    pub solver: SolverSummary,
}
