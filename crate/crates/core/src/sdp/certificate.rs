//! Independent rechecks of dual solutions.
//!
//! For multipliers `Z_k` (approximately PSD) and any `μ`, every `θ` that is
//! feasible for the original problem satisfies
//!
//! ```text
//! 0 ≤ Σ_k ⟨G_k(θ), Z_k⟩ + Σ_k λ⁻(Z_k) T_k
//!   = Σ_k ⟨F0_k, Z_k⟩ − μᵀb + θᵀ r + Σ_k λ⁻(Z_k) T_k,    r = g + Aᵀμ,
//! ```
//!
//! with `g_i = Σ_k ⟨F_ik, Z_k⟩`, `λ⁻` the magnitude of the most negative
//! eigenvalue and `T_k` the trace bound of cone `k`. Bounding `|θ_i| ≤ B_i`
//! turns this into an infeasibility certificate or an objective bound that
//! depends only on problem data and `Z`, never on solver status codes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::ConicProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DualCheck {
    /// `Σ ⟨F0_k, Z_k⟩ − μᵀb` after normalisation.
    pub dual_value: f64,
    /// Certified gap: positive means no feasible point exists.
    pub margin: f64,
    /// Worst PSD violation of `Z` and stationarity residual of unbounded
    /// variables.
    pub dual_residual: f64,
    /// `Σ B_i |r_i|`.
    pub box_penalty: f64,
    /// `Σ λ⁻(Z_k) T_k`.
    pub psd_penalty: f64,
    /// `Σ Tr Z_k` before normalisation.
    pub trace: f64,
}

impl DualCheck {
    pub fn passes(&self, margin: f64, tol: f64) -> bool {
        self.margin.is_finite() && self.margin >= margin && self.dual_residual <= tol
    }
}

/// Negative-eigenvalue magnitude of each block.
fn negative_parts(z: &[DMatrix<f64>]) -> Vec<f64> {
    z.iter()
        .map(|m| {
            if m.nrows() == 0 {
                return 0.0;
            }
            let sym = (m + m.transpose()) * 0.5;
            let lmin = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            (-lmin).max(0.0)
        })
        .collect()
}

/// Weight of unbounded variables in the multiplier fit.
const UNBOUNDED_WEIGHT: f64 = 1e8;

/// `μ` approximately minimising `Σ B_i |(v + Aᵀμ)_i|` over variables with
/// `B_i ≠ 0`, by iteratively reweighted least squares. Any `μ` keeps the
/// bounds valid; a good one makes them tight.
fn fit_multipliers(p: &ConicProblem, v: &[f64]) -> DVector<f64> {
    let rows = p.eq_rows.len();
    if rows == 0 {
        return DVector::zeros(0);
    }
    let cols: Vec<usize> = (0..p.n_vars()).filter(|&i| p.certificate_bounds[i] != 0.0).collect();
    let mut pos = vec![usize::MAX; p.n_vars()];
    for (k, &i) in cols.iter().enumerate() {
        pos[i] = k;
    }
    let mut a = DMatrix::<f64>::zeros(rows, cols.len());
    for (r, row) in p.eq_rows.iter().enumerate() {
        for &(i, x) in row {
            if pos[i] != usize::MAX {
                a[(r, pos[i])] += x;
            }
        }
    }
    let vv = DVector::from_iterator(cols.len(), cols.iter().map(|&i| v[i]));
    let bounds: Vec<f64> = cols
        .iter()
        .map(|&i| {
            let b = p.certificate_bounds[i];
            if b.is_finite() { b } else { UNBOUNDED_WEIGHT }
        })
        .collect();
    let cost = |mu: &DVector<f64>| -> f64 {
        let r = &vv + a.transpose() * mu;
        r.iter().zip(&bounds).map(|(x, b)| b * x.abs()).sum()
    };
    let weighted_solve = |w: &[f64], mu0: &DVector<f64>| -> Option<DVector<f64>> {
        let mut aw = a.clone();
        for (k, &wk) in w.iter().enumerate() {
            aw.column_mut(k).scale_mut(wk);
        }
        let m = &aw * a.transpose();
        let scale = m.diagonal().iter().fold(0.0f64, |x, &y| x.max(y)).max(1e-300);
        let mut reg = 1e-12 * scale;
        let chol = loop {
            let mut mm = m.clone();
            for i in 0..rows {
                mm[(i, i)] += reg;
            }
            if let Some(c) = mm.cholesky() {
                break c;
            }
            reg *= 100.0;
            if reg > scale {
                return None;
            }
        };
        // Iterative refinement against the unregularised residual.
        let mut mu = mu0.clone();
        for _ in 0..4 {
            let r = &vv + a.transpose() * &mu;
            let wr = DVector::from_iterator(r.len(), r.iter().zip(w).map(|(x, wk)| x * wk));
            mu += chol.solve(&(-(&a * wr)));
        }
        Some(mu)
    };
    let zero = DVector::zeros(rows);
    let mut best = zero.clone();
    let mut best_cost = cost(&best);
    let mut mu = match weighted_solve(&bounds, &zero) {
        Some(m) => m,
        None => return best,
    };
    let mut delta = 1e-4;
    for _ in 0..30 {
        let c = cost(&mu);
        if c < best_cost {
            best_cost = c;
            best = mu.clone();
        }
        let r = &vv + a.transpose() * &mu;
        let w: Vec<f64> = r.iter().zip(&bounds).map(|(x, b)| b / x.abs().max(delta)).collect();
        mu = match weighted_solve(&w, &mu) {
            Some(m) => m,
            None => break,
        };
        delta = (delta * 0.3).max(1e-13);
    }
    if cost(&mu) < best_cost {
        best = mu;
    }
    best
}

fn residual(p: &ConicProblem, v: &[f64], mu: &DVector<f64>) -> Vec<f64> {
    let mut r = v.to_vec();
    for (row, &m) in p.eq_rows.iter().zip(mu.iter()) {
        for &(i, x) in row {
            r[i] += x * m;
        }
    }
    r
}

fn rhs_term(p: &ConicProblem, mu: &DVector<f64>) -> f64 {
    p.eq_rhs.iter().zip(mu.iter()).map(|(b, m)| b * m).sum()
}

/// Recheck of an infeasibility certificate for the feasibility problem
/// (the objective is ignored).
pub fn check_infeasibility(p: &ConicProblem, z: &[DMatrix<f64>]) -> DualCheck {
    let trace: f64 = z.iter().map(|m| m.trace()).sum();
    if z.len() != p.cones.len() || !trace.is_finite() || trace <= 0.0 {
        return DualCheck {
            dual_value: f64::NAN,
            margin: f64::NEG_INFINITY,
            dual_residual: f64::INFINITY,
            box_penalty: f64::INFINITY,
            psd_penalty: f64::INFINITY,
            trace,
        };
    }
    let z: Vec<DMatrix<f64>> = z.iter().map(|m| (m + m.transpose()) * (0.5 / trace)).collect();
    let g: Vec<f64> = p.columns.iter().map(|c| ConicProblem::inner(c, &z)).collect();
    let mu = fit_multipliers(p, &g);
    let r = residual(p, &g, &mu);
    let dual_value = ConicProblem::inner(&p.constant, &z) - rhs_term(p, &mu);
    let neg = negative_parts(&z);
    let psd_penalty: f64 = neg.iter().zip(&p.trace_bounds).map(|(n, t)| n * t).sum();
    let mut box_penalty = 0.0;
    let mut dual_residual = neg.iter().copied().fold(0.0, f64::max);
    for (i, &b) in p.certificate_bounds.iter().enumerate() {
        if b.is_finite() {
            box_penalty += b * r[i].abs();
        } else {
            dual_residual = dual_residual.max(r[i].abs());
        }
    }
    DualCheck {
        dual_value,
        margin: -dual_value - box_penalty - psd_penalty,
        dual_residual,
        box_penalty,
        psd_penalty,
        trace,
    }
}

/// Certified upper bound on the objective over the feasible set. Returns
/// `None` when some unbounded variable keeps a nonzero reduced cost.
pub fn certified_upper_bound(p: &ConicProblem, z: &[DMatrix<f64>], tol: f64) -> (Option<f64>, DualCheck) {
    let z: Vec<DMatrix<f64>> = z.iter().map(|m| (m + m.transpose()) * 0.5).collect();
    let v: Vec<f64> = p
        .columns
        .iter()
        .zip(&p.objective)
        .map(|(col, c)| c + ConicProblem::inner(col, &z))
        .collect();
    let mu = fit_multipliers(p, &v);
    let r = residual(p, &v, &mu);
    let dual_value = ConicProblem::inner(&p.constant, &z) - rhs_term(p, &mu);
    let neg = negative_parts(&z);
    let psd_penalty: f64 = neg.iter().zip(&p.trace_bounds).map(|(n, t)| n * t).sum();
    let mut box_penalty = 0.0;
    let mut dual_residual = neg.iter().copied().fold(0.0, f64::max);
    for (i, &b) in p.certificate_bounds.iter().enumerate() {
        if b.is_finite() {
            box_penalty += b * r[i].abs();
        } else {
            dual_residual = dual_residual.max(r[i].abs());
        }
    }
    let bound = dual_value + box_penalty + psd_penalty;
    let trace = z.iter().map(|m| m.trace()).sum();
    let check = DualCheck { dual_value, margin: f64::NAN, dual_residual, box_penalty, psd_penalty, trace };
    let ok = bound.is_finite() && dual_residual <= tol;
    (ok.then_some(bound), check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::{Cone, Triplet};

    /// `[[x, 1], [1, x]] ⪰ 0` with `|x| ≤ 0.5` has no solution;
    /// `Z = [[1, −1], [−1, 1]] / 2` proves it with margin `1 − 0.5`.
    #[test]
    fn hand_certificate() {
        let mut p = ConicProblem::default();
        p.add_cone(Cone::Psd(2), 1.0);
        let x = p.add_var(0.5);
        p.constant = vec![Triplet { cone: 0, row: 0, col: 1, value: 1.0 }];
        p.columns[x] = vec![
            Triplet { cone: 0, row: 0, col: 0, value: 1.0 },
            Triplet { cone: 0, row: 1, col: 1, value: 1.0 },
        ];
        let z = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let c = check_infeasibility(&p, std::slice::from_ref(&z));
        assert!((c.dual_value + 1.0).abs() < 1e-14);
        assert!((c.box_penalty - 0.5).abs() < 1e-14);
        assert!((c.margin - 0.5).abs() < 1e-14);
        assert!(c.passes(0.4, 1e-12));
        p.certificate_bounds[x] = 1.5;
        assert!(!check_infeasibility(&p, &[z]).passes(0.0, 1e-12));
    }

    /// The equality `x = 0.5` moves into `μ`: max x subject to
    /// `x ≤ 1` (as `1 − x ≥ 0`), `x = 0.5` has bound 0.5.
    #[test]
    fn bound_uses_equalities() {
        let mut p = ConicProblem::default();
        p.add_cone(Cone::Nonneg(1), 2.0);
        let x = p.add_var(10.0);
        p.objective[x] = 1.0;
        p.constant = vec![Triplet { cone: 0, row: 0, col: 0, value: 1.0 }];
        p.columns[x] = vec![Triplet { cone: 0, row: 0, col: 0, value: -1.0 }];
        p.add_eq(vec![(x, 1.0)], 0.5);
        let (b, _) = certified_upper_bound(&p, &[DMatrix::zeros(1, 1)], 1e-9);
        assert!((b.unwrap() - 0.5).abs() < 1e-9);
        // Any multiplier gives a valid, possibly loose, bound.
        let (b, _) = certified_upper_bound(&p, &[DMatrix::from_element(1, 1, 1.0)], 1e-9);
        assert!((b.unwrap() - 1.0).abs() < 1e-9);
    }
}
