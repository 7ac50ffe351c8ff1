//! Membership, bound and instrumental modes.
//!
//! Membership problems maximise the smallest eigenvalue margin `t` of every
//! cone. A returned point is accepted only after the assembled certificate
//! revalidates; infeasibility is claimed only when the solver converged to
//! `t < 0` and the dual multipliers pass [`check_infeasibility`].

use super::certificate::{certified_upper_bound, check_infeasibility};
use super::ipm::NativeIpm;
use super::model::{self, Layout};
use super::problem::ConicProblem;
use super::{BoundOutcome, SolveOptions, SolveOutcome, SolverBackend, SolverStatus, SolverSummary};
use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::functional::SteeringFunctional;
use crate::instrumental::InstrumentalAssemblage;
use crate::moment::{certificate_constraints, MomentIndex};
use crate::report::ValidationReport;

fn check_level(level: usize) -> Result<()> {
    if level == 0 {
        return Err(invalid("level must be at least 1"));
    }
    Ok(())
}

fn solve(backend: &dyn SolverBackend, p: &ConicProblem) -> Result<(super::SolverResult, SolverSummary)> {
    let r = backend.solve(p)?;
    if r.theta.len() != p.n_vars() {
        return Err(Error::Solver("backend returned a point of the wrong length".into()));
    }
    let summary = SolverSummary::new(backend, p, &r);
    Ok((r, summary))
}

/// Primal revalidation: the certificate at `θ` plus, for free layouts, the
/// witness assemblage and `extra` checks on it.
fn revalidate(
    layout: &Layout,
    theta: &[f64],
    fixed: Option<&Assemblage>,
    tol: f64,
    extra: impl Fn(&Assemblage, &mut ValidationReport),
) -> Result<(crate::moment::MomentMatrix, ValidationReport, Option<Assemblage>)> {
    let gamma = layout.moment_matrix(theta)?;
    let witness = layout.assemblage(theta)?;
    let asm = match (&witness, fixed) {
        (Some(w), _) => w,
        (None, Some(a)) => a,
        (None, None) => return Err(invalid("nothing to validate against")),
    };
    let mut report = match certificate_constraints(&gamma.index, asm) {
        Ok(cons) => gamma.validate(&cons, tol),
        Err(Error::ConflictingTargets { residual, .. }) => {
            let mut r = ValidationReport::new(tol);
            r.record("data_consistency", residual);
            r
        }
        Err(e) => return Err(e),
    };
    if let Some(w) = &witness {
        let wrep = w.validate(tol);
        for c in &wrep.checks {
            report.record(&format!("witness_{}", c.name), c.residual);
        }
        extra(w, &mut report);
    }
    Ok((gamma, report, witness))
}

fn decide(
    p: &ConicProblem,
    layout: &Layout,
    result: super::SolverResult,
    solver: SolverSummary,
    fixed: Option<&Assemblage>,
    opts: &SolveOptions,
    extra: impl Fn(&Assemblage, &mut ValidationReport),
) -> Result<SolveOutcome> {
    let t = layout.t.map(|v| result.theta[v]).unwrap_or(f64::NAN);
    let (certificate, report, witness) = revalidate(layout, &result.theta, fixed, opts.tol, extra)?;
    if report.pass() {
        return Ok(SolveOutcome::Feasible { certificate, report, t, witness, solver });
    }
    if result.status == SolverStatus::Optimal && t < 0.0 {
        let check = check_infeasibility(p, &result.dual);
        if check.passes(opts.margin, opts.tol) {
            return Ok(SolveOutcome::Infeasible { dual: result.dual, check, solver });
        }
        return Ok(SolveOutcome::Unknown {
            reason: format!(
                "solver reports t = {t:.3e} but the dual recheck gives margin {:.3e} (residual {:.3e})",
                check.margin, check.dual_residual
            ),
            report: Some(report),
            check: Some(check),
            solver: Some(solver),
        });
    }
    Ok(SolveOutcome::Unknown {
        reason: format!("solver status {} with t = {t:.3e}; certificate failed revalidation", result.status),
        report: Some(report),
        check: None,
        solver: Some(solver),
    })
}

/// Is `asm` in the level-`level` set?
pub fn membership(asm: &Assemblage, level: usize, opts: &SolveOptions) -> Result<SolveOutcome> {
    membership_with(&NativeIpm::new(opts.settings.clone()), asm, level, opts)
}

pub fn membership_with(
    backend: &dyn SolverBackend,
    asm: &Assemblage,
    level: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    check_level(level)?;
    let input = asm.validate(opts.tol);
    if !input.pass() {
        return Err(invalid(format!("assemblage fails validation:\n{input}")));
    }
    let index = MomentIndex::build(&asm.scenario, level)?;
    let (p, layout) = model::membership_problem(&index, asm)?;
    let (result, solver) = solve(backend, &p)?;
    decide(&p, &layout, result, solver, Some(asm), opts, |_, _| {})
}

/// Upper bound on `functional` over the level-`level` set.
pub fn bound(functional: &SteeringFunctional, level: usize, opts: &SolveOptions) -> Result<BoundOutcome> {
    bound_with(&NativeIpm::new(opts.settings.clone()), functional, level, opts)
}

pub fn bound_with(
    backend: &dyn SolverBackend,
    functional: &SteeringFunctional,
    level: usize,
    opts: &SolveOptions,
) -> Result<BoundOutcome> {
    check_level(level)?;
    let index = MomentIndex::build(&functional.scenario, level)?;
    let (p, layout) = model::bound_problem(&index, &functional.coefficients)?;
    let (result, solver) = solve(backend, &p)?;
    let (upper_bound, check) = certified_upper_bound(&p, &result.dual, opts.tol);
    if upper_bound.is_none() {
        log::warn!("dual bound recheck failed: residual {:.3e}", check.dual_residual);
    }
    let (certificate, report, optimizer) = revalidate(&layout, &result.theta, None, opts.tol, |_, _| {})?;
    let optimizer = optimizer.expect("bound layouts carry an assemblage");
    let primal_value = functional.value(&optimizer)?;
    let ok = report.pass();
    Ok(BoundOutcome {
        upper_bound,
        primal_value,
        optimizer: ok.then_some(optimizer),
        certificate: ok.then_some(certificate),
        report,
        solver,
    })
}

/// Is `ia` the post-selection of some level-`level` Bob-with-Input
/// assemblage?
pub fn instrumental_membership(
    ia: &InstrumentalAssemblage,
    level: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    instrumental_membership_with(&NativeIpm::new(opts.settings.clone()), ia, level, opts)
}

pub fn instrumental_membership_with(
    backend: &dyn SolverBackend,
    ia: &InstrumentalAssemblage,
    level: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    check_level(level)?;
    let input = ia.validate(opts.tol);
    if !input.pass() {
        return Err(invalid(format!("instrumental assemblage fails validation:\n{input}")));
    }
    let index = MomentIndex::build(&ia.scenario, level)?;
    let pins = instrumental_pins(ia);
    let (p, layout) = model::pinned_problem(&index, &pins)?;
    let (result, solver) = solve(backend, &p)?;
    let check_pins = |w: &Assemblage, rep: &mut ValidationReport| {
        for (b, m) in &pins {
            rep.record("pinned_blocks", crate::linalg::max_abs_diff(&w.blocks[*b], m));
        }
    };
    decide(&p, &layout, result, solver, None, opts, check_pins)
}

/// Recheck stored dual multipliers against the membership problem for `asm`.
pub fn recheck_membership_dual(asm: &Assemblage, level: usize, z: &[nalgebra::DMatrix<f64>]) -> Result<super::DualCheck> {
    check_level(level)?;
    let index = MomentIndex::build(&asm.scenario, level)?;
    let (p, _) = model::membership_problem(&index, asm)?;
    Ok(check_infeasibility(&p, z))
}

/// Recheck stored dual multipliers against the instrumental problem for `ia`.
pub fn recheck_instrumental_dual(
    ia: &InstrumentalAssemblage,
    level: usize,
    z: &[nalgebra::DMatrix<f64>],
) -> Result<super::DualCheck> {
    check_level(level)?;
    let (p, _) = model::pinned_problem(&MomentIndex::build(&ia.scenario, level)?, &instrumental_pins(ia))?;
    Ok(check_infeasibility(&p, z))
}

fn instrumental_pins(ia: &InstrumentalAssemblage) -> Vec<(usize, crate::linalg::CMat)> {
    let s = ia.scenario;
    ia.embed()
        .into_iter()
        .map(|pin| (s.block_index(&[pin.a], &[pin.x], pin.y), pin.block))
        .collect()
}
