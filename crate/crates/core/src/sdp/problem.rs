//! Sparse conic problem exchanged with solver backends.
//!
//! Variables `θ ∈ R^m` enter affine symmetric matrices
//!
//! ```text
//! G_k(θ) = F0_k + Σ_i θ_i F_ik ⪰ 0        for every cone k
//! ```
//!
//! subject to sparse equalities `Aθ = b` and boxes `|θ_i| ≤ B_i`
//! (`B_i = ∞` means unbounded). The objective `cᵀθ` is maximised.
//!
//! Matrices are given as triplets `(cone, row, col, value)` with
//! `row ≤ col`; the lower triangle is implied by symmetry. A nonnegative
//! cone is a diagonal matrix and uses `row == col`.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// Symmetric positive semidefinite matrices of the given order.
    Psd(usize),
    /// Nonnegative vectors of the given length.
    Nonneg(usize),
}

impl Cone {
    pub fn order(&self) -> usize {
        match *self {
            Cone::Psd(n) | Cone::Nonneg(n) => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet {
    pub cone: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub cones: Vec<Cone>,
    pub constant: Vec<Triplet>,
    /// `columns[i]` holds the triplets of `F_i`.
    pub columns: Vec<Vec<Triplet>>,
    pub objective: Vec<f64>,
    /// Sparse rows of `A` as `(variable, coefficient)`.
    pub eq_rows: Vec<Vec<(usize, f64)>>,
    pub eq_rhs: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Bounds used when checking dual certificates; may be smaller than
    /// `bounds` for auxiliary variables.
    pub certificate_bounds: Vec<f64>,
    /// Upper bound on `Tr G_k` over the points a certificate argues about.
    pub trace_bounds: Vec<f64>,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn add_var(&mut self, bound: f64) -> usize {
        self.columns.push(Vec::new());
        self.objective.push(0.0);
        self.bounds.push(bound);
        self.certificate_bounds.push(bound);
        self.columns.len() - 1
    }

    pub fn add_cone(&mut self, cone: Cone, trace_bound: f64) -> usize {
        self.cones.push(cone);
        self.trace_bounds.push(trace_bound);
        self.cones.len() - 1
    }

    pub fn add_eq(&mut self, row: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    /// Sort triplets and merge duplicates.
    pub fn compress(&mut self) {
        compress(&mut self.constant);
        for c in &mut self.columns {
            compress(c);
        }
        for r in &mut self.eq_rows {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
            for &(v, x) in r.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += x,
                    _ => merged.push((v, x)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *r = merged;
        }
    }

    pub fn check(&self) -> Result<()> {
        let m = self.n_vars();
        if self.objective.len() != m || self.bounds.len() != m || self.certificate_bounds.len() != m {
            return Err(invalid("per-variable arrays disagree in length"));
        }
        if self.trace_bounds.len() != self.cones.len() || self.eq_rows.len() != self.eq_rhs.len() {
            return Err(invalid("per-cone or per-row arrays disagree in length"));
        }
        let ok = |t: &Triplet| {
            t.cone < self.cones.len()
                && t.row <= t.col
                && t.col < self.cones[t.cone].order()
                && (matches!(self.cones[t.cone], Cone::Psd(_)) || t.row == t.col)
        };
        if !self.constant.iter().all(ok) || !self.columns.iter().flatten().all(ok) {
            return Err(invalid("triplet outside its cone or below the diagonal"));
        }
        if self.eq_rows.iter().flatten().any(|&(v, _)| v >= m) {
            return Err(invalid("equality references an unknown variable"));
        }
        Ok(())
    }

    /// Dense `G_k(θ)` for every cone (nonnegative cones as diagonal matrices).
    pub fn evaluate(&self, theta: &[f64]) -> Vec<nalgebra::DMatrix<f64>> {
        let mut out: Vec<nalgebra::DMatrix<f64>> = self
            .cones
            .iter()
            .map(|c| nalgebra::DMatrix::zeros(c.order(), c.order()))
            .collect();
        let mut put = |t: &Triplet, scale: f64| {
            let m = &mut out[t.cone];
            m[(t.row, t.col)] += scale * t.value;
            if t.row != t.col {
                m[(t.col, t.row)] += scale * t.value;
            }
        };
        for t in &self.constant {
            put(t, 1.0);
        }
        for (i, col) in self.columns.iter().enumerate() {
            if theta[i] != 0.0 {
                for t in col {
                    put(t, theta[i]);
                }
            }
        }
        out
    }

    /// `⟨F, Z⟩` for a triplet list against dense symmetric blocks.
    pub fn inner(triplets: &[Triplet], z: &[nalgebra::DMatrix<f64>]) -> f64 {
        triplets
            .iter()
            .map(|t| {
                let w = if t.row == t.col { 1.0 } else { 2.0 };
                w * t.value * z[t.cone][(t.row, t.col)]
            })
            .sum()
    }
}

fn compress(ts: &mut Vec<Triplet>) {
    ts.sort_by_key(|a| (a.cone, a.row, a.col));
    let mut merged: Vec<Triplet> = Vec::with_capacity(ts.len());
    for t in ts.iter() {
        match merged.last_mut() {
            Some(last) if (last.cone, last.row, last.col) == (t.cone, t.row, t.col) => last.value += t.value,
            _ => merged.push(*t),
        }
    }
    merged.retain(|t| t.value != 0.0);
    *ts = merged;
}
