//! Native primal-dual interior-point backend.
//!
//! Equalities are eliminated first (`θ = θ0 + N z`, reduced row echelon form
//! with full pivoting) and boxes become a nonnegative cone, leaving
//!
//! ```text
//! (P) min ⟨C, X⟩  s.t. ⟨A_j, X⟩ = b_j, X ⪰ 0
//! (D) max bᵀz     s.t. S = C − Σ_j z_j A_j ⪰ 0
//! ```
//!
//! with `A_j = −F′_j`. Directions are HKM with a Mehrotra predictor-corrector
//! and an infeasible start `X = ξI`, `S = ηI`.

use nalgebra::{DMatrix, DVector};

use super::problem::{Cone, ConicProblem, Triplet};
use super::{SolverBackend, SolverResult, SolverSettings, SolverStatus};
use crate::error::Result;

const STEP_FRACTION: f64 = 0.95;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Default)]
pub struct NativeIpm {
    pub settings: SolverSettings,
}

impl NativeIpm {
    pub fn new(settings: SolverSettings) -> Self {
        NativeIpm { settings }
    }
}

impl SolverBackend for NativeIpm {
    fn name(&self) -> &str {
        "native-ipm"
    }

    fn solve(&self, problem: &ConicProblem) -> Result<SolverResult> {
        problem.check()?;
        let elim = match Elimination::new(problem) {
            Ok(e) => e,
            Err(residual) => {
                return Ok(SolverResult::failed(
                    problem,
                    SolverStatus::InconsistentEqualities,
                    format!("linear equalities are inconsistent (residual {residual:.3e})"),
                ))
            }
        };
        let std = StandardForm::new(problem, &elim);
        let run = std.solve(&self.settings);
        let z = &run.y;
        let mut theta = elim.theta0.clone();
        for (j, &f) in elim.free.iter().enumerate() {
            theta[f] += z[j];
        }
        for (r, &p) in elim.pivots.iter().enumerate() {
            for (j, &coef) in elim.reduced[r].iter().enumerate() {
                if coef != 0.0 {
                    theta[p] -= coef * z[j];
                }
            }
        }
        let primal_objective: f64 = theta.iter().zip(&problem.objective).map(|(t, c)| t * c).sum();
        let dual_objective = run.pobj + elim.objective_offset;
        let dual = run.x[..problem.cones.len()].iter().map(Blk::to_dense).collect();
        Ok(SolverResult {
            status: run.status,
            message: run.message,
            theta,
            dual,
            primal_objective,
            dual_objective,
            iterations: run.iterations,
            primal_infeasibility: run.pinf,
            dual_infeasibility: run.dinf,
            relative_gap: run.gap,
        })
    }
}

/// `θ = θ0 + N z`: free variables take `z` directly; pivot `p_r` equals
/// `rhs_r − Σ_j reduced[r][j] z_j`.
struct Elimination {
    free: Vec<usize>,
    pivots: Vec<usize>,
    reduced: Vec<Vec<f64>>,
    theta0: Vec<f64>,
    objective_offset: f64,
    /// `N` column by column: `(variable, coefficient)`.
    n_cols: Vec<Vec<(usize, f64)>>,
}

impl Elimination {
    fn new(p: &ConicProblem) -> std::result::Result<Self, f64> {
        let m = p.n_vars();
        let rows = p.eq_rows.len();
        let mut e = DMatrix::<f64>::zeros(rows, m);
        let mut rhs = p.eq_rhs.clone();
        for (r, row) in p.eq_rows.iter().enumerate() {
            for &(v, x) in row {
                e[(r, v)] += x;
            }
        }
        let scale = e.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        let tol = RANK_TOL * scale;
        let mut is_pivot = vec![false; m];
        // (row, column) of each pivot; rows are processed in order and
        // every pivot column is cleared from all other rows.
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut dependent: Vec<usize> = Vec::new();
        for r in 0..rows {
            let mut best = (0.0, 0);
            for c in 0..m {
                if !is_pivot[c] && e[(r, c)].abs() > best.0 {
                    best = (e[(r, c)].abs(), c);
                }
            }
            if best.0 <= tol {
                dependent.push(r);
                continue;
            }
            let c = best.1;
            let inv = 1.0 / e[(r, c)];
            e.row_mut(r).scale_mut(inv);
            rhs[r] *= inv;
            let nz: Vec<(usize, f64)> = (0..m).filter(|&c2| e[(r, c2)] != 0.0).map(|c2| (c2, e[(r, c2)])).collect();
            for r2 in 0..rows {
                if r2 == r {
                    continue;
                }
                let f = e[(r2, c)];
                if f != 0.0 {
                    for &(c2, v) in &nz {
                        let x = e[(r2, c2)] - f * v;
                        e[(r2, c2)] = if x.abs() < 1e-14 { 0.0 } else { x };
                    }
                    e[(r2, c)] = 0.0;
                    rhs[r2] -= f * rhs[r];
                }
            }
            is_pivot[c] = true;
            pivots.push((r, c));
        }
        let rhs_scale = rhs.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let worst = dependent.iter().fold(0.0f64, |a, &r| a.max(rhs[r].abs()));
        if worst > 1e-9 * rhs_scale {
            return Err(worst);
        }
        let free: Vec<usize> = (0..m).filter(|&c| !is_pivot[c]).collect();
        let mut theta0 = vec![0.0; m];
        let mut reduced = Vec::with_capacity(pivots.len());
        for &(r, pv) in &pivots {
            theta0[pv] = rhs[r];
            reduced.push(free.iter().map(|&f| e[(r, f)]).collect::<Vec<f64>>());
        }
        let pivot_of_row: Vec<usize> = pivots.iter().map(|p| p.1).collect();
        let mut n_cols: Vec<Vec<(usize, f64)>> = free.iter().map(|&f| vec![(f, 1.0)]).collect();
        for (r, &pv) in pivot_of_row.iter().enumerate() {
            for (j, &coef) in reduced[r].iter().enumerate() {
                if coef.abs() > 1e-15 {
                    n_cols[j].push((pv, -coef));
                }
            }
        }
        let objective_offset = theta0.iter().zip(&p.objective).map(|(t, c)| t * c).sum();
        Ok(Elimination { free, pivots: pivot_of_row, reduced, theta0, objective_offset, n_cols })
    }
}

/// Block of a block-diagonal matrix.
#[derive(Clone, Debug)]
enum Blk {
    Psd(DMatrix<f64>),
    Lp(DVector<f64>),
}

impl Blk {
    fn zeros_like(kind: &Cone) -> Blk {
        match *kind {
            Cone::Psd(n) => Blk::Psd(DMatrix::zeros(n, n)),
            Cone::Nonneg(n) => Blk::Lp(DVector::zeros(n)),
        }
    }

    fn scaled_identity(kind: &Cone, s: f64) -> Blk {
        match *kind {
            Cone::Psd(n) => Blk::Psd(DMatrix::identity(n, n) * s),
            Cone::Nonneg(n) => Blk::Lp(DVector::from_element(n, s)),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Blk::Psd(m) => m.clone(),
            Blk::Lp(v) => DMatrix::from_diagonal(v),
        }
    }

    fn inner(&self, other: &Blk) -> f64 {
        match (self, other) {
            (Blk::Psd(a), Blk::Psd(b)) => a.dot(b),
            (Blk::Lp(a), Blk::Lp(b)) => a.dot(b),
            _ => unreachable!(),
        }
    }

    fn norm2(&self) -> f64 {
        match self {
            Blk::Psd(a) => a.norm_squared(),
            Blk::Lp(a) => a.norm_squared(),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Blk) {
        match (self, other) {
            (Blk::Psd(a), Blk::Psd(b)) => a.zip_apply(b, |x, y| *x += alpha * y),
            (Blk::Lp(a), Blk::Lp(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!(),
        }
    }
}

fn inner_all(a: &[Blk], b: &[Blk]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

fn norm_all(a: &[Blk]) -> f64 {
    a.iter().map(Blk::norm2).sum::<f64>().sqrt()
}

struct StandardForm {
    cones: Vec<Cone>,
    c: Vec<Blk>,
    /// `a[j]`: upper-triangle entries of `A_j`.
    a: Vec<Vec<Triplet>>,
    b: DVector<f64>,
    /// Per cone, entries of every `A_j` sorted by variable.
    by_cone: Vec<Vec<(usize, Triplet)>>,
}

struct Run {
    status: SolverStatus,
    message: String,
    x: Vec<Blk>,
    y: DVector<f64>,
    pobj: f64,
    iterations: usize,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

impl StandardForm {
    fn new(p: &ConicProblem, elim: &Elimination) -> Self {
        let mut cones = p.cones.clone();
        let boxed: Vec<usize> = (0..p.n_vars()).filter(|&i| p.bounds[i].is_finite()).collect();
        let box_cone = if boxed.is_empty() {
            None
        } else {
            cones.push(Cone::Nonneg(2 * boxed.len()));
            Some(cones.len() - 1)
        };
        let mut box_row = vec![usize::MAX; p.n_vars()];
        for (k, &i) in boxed.iter().enumerate() {
            box_row[i] = k;
        }

        let mut c: Vec<Blk> = cones.iter().map(Blk::zeros_like).collect();
        let put = |blocks: &mut Vec<Blk>, t: &Triplet, s: f64| match &mut blocks[t.cone] {
            Blk::Psd(m) => {
                m[(t.row, t.col)] += s * t.value;
                if t.row != t.col {
                    m[(t.col, t.row)] += s * t.value;
                }
            }
            Blk::Lp(v) => v[t.row] += s * t.value,
        };
        for t in &p.constant {
            put(&mut c, t, 1.0);
        }
        for (i, &th) in elim.theta0.iter().enumerate() {
            if th != 0.0 {
                for t in &p.columns[i] {
                    put(&mut c, t, th);
                }
            }
        }
        if let (Some(bc), Blk::Lp(v)) = (box_cone, c.last_mut().unwrap()) {
            let _ = bc;
            for (k, &i) in boxed.iter().enumerate() {
                v[2 * k] = p.bounds[i] - elim.theta0[i];
                v[2 * k + 1] = p.bounds[i] + elim.theta0[i];
            }
        }

        let mut a: Vec<Vec<Triplet>> = Vec::with_capacity(elim.free.len());
        let mut b = DVector::zeros(elim.free.len());
        for (j, col) in elim.n_cols.iter().enumerate() {
            let mut ts: Vec<Triplet> = Vec::new();
            let mut bj = 0.0;
            for &(i, coef) in col {
                bj += p.objective[i] * coef;
                for t in &p.columns[i] {
                    ts.push(Triplet { value: -coef * t.value, ..*t });
                }
                if let Some(bc) = box_cone {
                    let k = box_row[i];
                    if k != usize::MAX {
                        ts.push(Triplet { cone: bc, row: 2 * k, col: 2 * k, value: coef });
                        ts.push(Triplet { cone: bc, row: 2 * k + 1, col: 2 * k + 1, value: -coef });
                    }
                }
            }
            merge(&mut ts);
            a.push(ts);
            b[j] = bj;
        }
        let mut by_cone: Vec<Vec<(usize, Triplet)>> = vec![Vec::new(); cones.len()];
        for (j, ts) in a.iter().enumerate() {
            for t in ts {
                by_cone[t.cone].push((j, *t));
            }
        }
        StandardForm { cones, c, a, b, by_cone }
    }

    fn a_op(&self, x: &[Blk]) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a.iter().map(|ts| {
                ts.iter()
                    .map(|t| match &x[t.cone] {
                        Blk::Psd(m) => {
                            if t.row == t.col {
                                t.value * m[(t.row, t.row)]
                            } else {
                                t.value * (m[(t.row, t.col)] + m[(t.col, t.row)])
                            }
                        }
                        Blk::Lp(v) => t.value * v[t.row],
                    })
                    .sum()
            }),
        )
    }

    fn at_op(&self, y: &DVector<f64>) -> Vec<Blk> {
        let mut out: Vec<Blk> = self.cones.iter().map(Blk::zeros_like).collect();
        for (j, ts) in self.a.iter().enumerate() {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for t in ts {
                match &mut out[t.cone] {
                    Blk::Psd(m) => {
                        m[(t.row, t.col)] += yj * t.value;
                        if t.row != t.col {
                            m[(t.col, t.row)] += yj * t.value;
                        }
                    }
                    Blk::Lp(v) => v[t.row] += yj * t.value,
                }
            }
        }
        out
    }

    fn initial_point(&self) -> (Vec<Blk>, Vec<Blk>) {
        let mut x = Vec::new();
        let mut s = Vec::new();
        let norms: Vec<Vec<f64>> = {
            let mut per: Vec<Vec<f64>> = vec![vec![0.0; self.a.len()]; self.cones.len()];
            for (k, list) in self.by_cone.iter().enumerate() {
                for (j, t) in list {
                    let w = if t.row == t.col { 1.0 } else { 2.0 };
                    per[k][*j] += w * t.value * t.value;
                }
            }
            per.into_iter().map(|v| v.into_iter().map(f64::sqrt).collect()).collect()
        };
        for (k, cone) in self.cones.iter().enumerate() {
            let n = cone.order() as f64;
            let mut ratio: f64 = 1.0;
            let mut amax: f64 = 0.0;
            for (j, &nj) in norms[k].iter().enumerate() {
                if nj > 0.0 {
                    ratio = ratio.max((1.0 + self.b[j].abs()) / (1.0 + nj));
                    amax = amax.max(nj);
                }
            }
            let xi = 10f64.max(n.sqrt()).max(n.sqrt() * ratio);
            let eta = 10f64.max(n.sqrt()).max(amax).max(self.c[k].norm2().sqrt());
            x.push(Blk::scaled_identity(cone, xi));
            s.push(Blk::scaled_identity(cone, eta));
        }
        (x, s)
    }

    /// Schur complement `M_ij = ⟨A_i, X A_j S⁻¹⟩`.
    fn schur(&self, x: &[Blk], sinv: &[Blk]) -> DMatrix<f64> {
        let m = self.a.len();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (k, list) in self.by_cone.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            match (&x[k], &sinv[k]) {
                (Blk::Psd(xk), Blk::Psd(sk)) => {
                    let n = xk.nrows();
                    let mut start = 0;
                    while start < list.len() {
                        let j = list[start].0;
                        let mut end = start;
                        while end < list.len() && list[end].0 == j {
                            end += 1;
                        }
                        let terms = &list[start..end];
                        let q: usize = terms.iter().map(|(_, t)| if t.row == t.col { 1 } else { 2 }).sum();
                        let mut u = DMatrix::<f64>::zeros(n, q);
                        let mut v = DMatrix::<f64>::zeros(q, n);
                        let mut col = 0;
                        for (_, t) in terms {
                            u.column_mut(col).axpy(t.value, &xk.column(t.row), 0.0);
                            v.row_mut(col).copy_from(&sk.row(t.col));
                            col += 1;
                            if t.row != t.col {
                                u.column_mut(col).axpy(t.value, &xk.column(t.col), 0.0);
                                v.row_mut(col).copy_from(&sk.row(t.row));
                                col += 1;
                            }
                        }
                        let w = &u * &v;
                        for (i, t) in list {
                            let val = if t.row == t.col {
                                w[(t.row, t.row)]
                            } else {
                                w[(t.row, t.col)] + w[(t.col, t.row)]
                            };
                            out[(*i, j)] += t.value * val;
                        }
                        start = end;
                    }
                }
                (Blk::Lp(xk), Blk::Lp(sk)) => {
                    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); xk.len()];
                    for (j, t) in list {
                        rows[t.row].push((*j, t.value));
                    }
                    for (l, entries) in rows.iter().enumerate() {
                        let w = xk[l] * sk[l];
                        for &(i, ai) in entries {
                            for &(j, aj) in entries {
                                out[(i, j)] += w * ai * aj;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        
        (&out + out.transpose()) * 0.5
    }

    fn solve(&self, settings: &SolverSettings) -> Run {
        let m = self.a.len();
        let (mut x, mut s) = self.initial_point();
        let mut y = DVector::<f64>::zeros(m);
        let nu: f64 = self.cones.iter().map(|c| c.order() as f64).sum();
        let bnorm = self.b.norm();
        let cnorm = norm_all(&self.c);
        let mut status = SolverStatus::MaxIterations;
        let mut message = String::new();
        let mut iterations = 0;
        let (mut pinf, mut dinf, mut gap, mut pobj);
        loop {
            let ax = self.a_op(&x);
            let rp = &self.b - &ax;
            let aty = self.at_op(&y);
            let mut rd: Vec<Blk> = self.c.clone();
            for k in 0..rd.len() {
                rd[k].axpy(-1.0, &s[k]);
                rd[k].axpy(-1.0, &aty[k]);
            }
            pobj = inner_all(&self.c, &x);
            let dobj = self.b.dot(&y);
            pinf = rp.norm() / (1.0 + bnorm);
            dinf = norm_all(&rd) / (1.0 + cnorm);
            let abs_gap = (pobj - dobj).abs();
            gap = abs_gap / (1.0 + pobj.abs() + dobj.abs());
            log::debug!(
                "ipm {iterations:3} pobj {pobj:+.9e} dobj {dobj:+.9e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e}"
            );
            if pinf <= settings.feasibility_tol
                && dinf <= settings.feasibility_tol
                && (gap <= settings.gap_rel || abs_gap <= settings.gap_abs)
            {
                status = SolverStatus::Optimal;
                break;
            }
            if iterations >= settings.max_iterations {
                message = "iteration limit reached".into();
                break;
            }
            iterations += 1;

            let sinv: Vec<Blk> = match s.iter().map(inverse).collect::<Option<Vec<Blk>>>() {
                Some(v) => v,
                None => {
                    status = SolverStatus::NumericalFailure;
                    message = "slack lost definiteness".into();
                    break;
                }
            };
            let mu = inner_all(&x, &s) / nu;
            let chol = match factor(self.schur(&x, &sinv)) {
                Some(c) => c,
                None => {
                    status = SolverStatus::NumericalFailure;
                    message = "Schur complement is not positive definite".into();
                    break;
                }
            };
            // X R_d S⁻¹ is shared by both solves.
            let xrds: Vec<Blk> = (0..x.len()).map(|k| triple(&x[k], &rd[k], &sinv[k])).collect();
            let a_xrds = self.a_op(&xrds);

            let direction = |g: &[Blk]| -> (DVector<f64>, Vec<Blk>, Vec<Blk>) {
                let rhs = &rp - self.a_op(g) + &a_xrds;
                let dy = chol.solve(&rhs);
                let atdy = self.at_op(&dy);
                let mut ds = rd.clone();
                for k in 0..ds.len() {
                    ds[k].axpy(-1.0, &atdy[k]);
                }
                let dx: Vec<Blk> = (0..x.len())
                    .map(|k| {
                        let mut t = g[k].clone();
                        t.axpy(-1.0, &triple(&x[k], &ds[k], &sinv[k]));
                        symmetrize(t)
                    })
                    .collect();
                (dy, dx, ds)
            };

            let g_aff: Vec<Blk> = x
                .iter()
                .map(|xk| {
                    let mut t = xk.clone();
                    scale(&mut t, -1.0);
                    t
                })
                .collect();
            let (_, dx_a, ds_a) = direction(&g_aff);
            let ap = max_step(&x, &dx_a).min(1.0);
            let ad = max_step(&s, &ds_a).min(1.0);
            let mut x_try = x.clone();
            let mut s_try = s.clone();
            for k in 0..x.len() {
                x_try[k].axpy(ap, &dx_a[k]);
                s_try[k].axpy(ad, &ds_a[k]);
            }
            let mu_aff = inner_all(&x_try, &s_try) / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            let g: Vec<Blk> = (0..x.len())
                .map(|k| {
                    let mut t = corrector(&dx_a[k], &ds_a[k], &sinv[k], sigma * mu);
                    t.axpy(-1.0, &x[k]);
                    t
                })
                .collect();
            let (dy, dx, ds) = direction(&g);
            let ap = (STEP_FRACTION * max_step(&x, &dx)).min(1.0);
            let ad = (STEP_FRACTION * max_step(&s, &ds)).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                status = SolverStatus::NumericalFailure;
                message = "step length collapsed".into();
                break;
            }
            for k in 0..x.len() {
                x[k].axpy(ap, &dx[k]);
                s[k].axpy(ad, &ds[k]);
            }
            y.axpy(ad, &dy, 1.0);
        }
        Run { status, message, x, y, pobj, iterations, pinf, dinf, gap }
    }
}

fn merge(ts: &mut Vec<Triplet>) {
    ts.sort_by_key(|a| (a.cone, a.row, a.col));
    let mut out: Vec<Triplet> = Vec::with_capacity(ts.len());
    for t in ts.iter() {
        match out.last_mut() {
            Some(l) if (l.cone, l.row, l.col) == (t.cone, t.row, t.col) => l.value += t.value,
            _ => out.push(*t),
        }
    }
    out.retain(|t| t.value != 0.0);
    *ts = out;
}

fn scale(b: &mut Blk, s: f64) {
    match b {
        Blk::Psd(m) => *m *= s,
        Blk::Lp(v) => *v *= s,
    }
}

fn symmetrize(b: Blk) -> Blk {
    match b {
        Blk::Psd(m) => Blk::Psd((&m + m.transpose()) * 0.5),
        lp => lp,
    }
}

fn inverse(b: &Blk) -> Option<Blk> {
    match b {
        Blk::Psd(m) => {
            let sym = (m + m.transpose()) * 0.5;
            let inv = sym.cholesky()?.inverse();
            Some(Blk::Psd((&inv + inv.transpose()) * 0.5))
        }
        Blk::Lp(v) => {
            if v.iter().all(|&e| e > 0.0) {
                Some(Blk::Lp(v.map(|e| 1.0 / e)))
            } else {
                None
            }
        }
    }
}

/// `X M S⁻¹`.
fn triple(x: &Blk, m: &Blk, sinv: &Blk) -> Blk {
    match (x, m, sinv) {
        (Blk::Psd(x), Blk::Psd(m), Blk::Psd(si)) => Blk::Psd(x * m * si),
        (Blk::Lp(x), Blk::Lp(m), Blk::Lp(si)) => Blk::Lp(x.component_mul(m).component_mul(si)),
        _ => unreachable!(),
    }
}

/// `(σμ I − ΔX ΔS) S⁻¹`.
fn corrector(dx: &Blk, ds: &Blk, sinv: &Blk, target: f64) -> Blk {
    match (dx, ds, sinv) {
        (Blk::Psd(dx), Blk::Psd(ds), Blk::Psd(si)) => {
            let n = dx.nrows();
            let inner = DMatrix::identity(n, n) * target - dx * ds;
            Blk::Psd(inner * si)
        }
        (Blk::Lp(dx), Blk::Lp(ds), Blk::Lp(si)) => {
            Blk::Lp(DVector::from_iterator(dx.len(), (0..dx.len()).map(|l| (target - dx[l] * ds[l]) * si[l])))
        }
        _ => unreachable!(),
    }
}

/// Largest `α` with `X + αΔX ⪰ 0` (may be infinite).
fn max_step(x: &[Blk], dx: &[Blk]) -> f64 {
    let mut best = f64::INFINITY;
    for (xk, dk) in x.iter().zip(dx) {
        match (xk, dk) {
            (Blk::Psd(xm), Blk::Psd(dm)) => {
                let sym = (xm + xm.transpose()) * 0.5;
                let chol = match sym.cholesky() {
                    Some(c) => c,
                    None => return 0.0,
                };
                let l = chol.l();
                let linv = match l.clone().try_inverse() {
                    Some(v) => v,
                    None => return 0.0,
                };
                let t = &linv * dm * linv.transpose();
                let t = (&t + t.transpose()) * 0.5;
                let lmin = t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
                if lmin < 0.0 {
                    best = best.min(-1.0 / lmin);
                }
            }
            (Blk::Lp(xv), Blk::Lp(dv)) => {
                for l in 0..xv.len() {
                    if dv[l] < 0.0 {
                        best = best.min(-xv[l] / dv[l]);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    best
}

struct Factor(nalgebra::Cholesky<f64, nalgebra::Dyn>);

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.0.solve(rhs)
    }
}

fn factor(m: DMatrix<f64>) -> Option<Factor> {
    if m.nrows() == 0 {
        return nalgebra::Cholesky::new(m).map(Factor);
    }
    let diag_max = m.diagonal().iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut trial = m.clone();
        if reg > 0.0 {
            for i in 0..trial.nrows() {
                trial[(i, i)] += reg;
            }
        }
        if let Some(c) = nalgebra::Cholesky::new(trial) {
            return Some(Factor(c));
        }
        reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
    }
    None
}
