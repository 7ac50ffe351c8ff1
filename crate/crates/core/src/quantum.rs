//! Explicit quantum realisations of Bob-with-Input assemblages.

use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::scenario::ScenarioSpec;

/// Pure state on `A_1 ⊗ … ⊗ A_N ⊗ B_aux ⊗ B_(i)`, projective measurements
/// `Π_{a|x}` per party and unitaries `U_y` on `B_aux ⊗ B_(i)`. The input
/// system `B_(i)` has Bob's dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRealization {
    pub alice_dims: Vec<usize>,
    pub aux_dim: usize,
    pub bob_dim: usize,
    pub state: CVec,
    /// `measurements[party][x][a]`.
    pub measurements: Vec<Vec<Vec<CMat>>>,
    /// `unitaries[y]`.
    pub unitaries: Vec<CMat>,
}

pub const REALIZATION_TOL: f64 = 1e-10;

impl QuantumRealization {
    /// Subsystem dimensions in tensor order.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.alice_dims.clone();
        d.push(self.aux_dim);
        d.push(self.bob_dim);
        d
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let n = self.alice_dims.len();
        let first = self
            .measurements
            .first()
            .ok_or_else(|| invalid("realization has no Alice"))?;
        let n_inputs = first.len();
        let n_outcomes = first.first().map(Vec::len).unwrap_or(0);
        ScenarioSpec::new(n, n_outcomes, n_inputs, self.unitaries.len(), self.bob_dim)
    }

    /// Check the structural invariants at tolerance `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.alice_dims.len();
        if self.measurements.len() != n {
            return Err(Error::DimensionMismatch("one measurement set per Alice required".into()));
        }
        if self.state.len() != self.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has length {}, expected {}",
                self.state.len(),
                self.total_dim()
            )));
        }
        if (self.state.norm() - 1.0).abs() > tol {
            return Err(invalid("state vector is not normalised"));
        }
        let s = self.scenario()?;
        for (k, meas) in self.measurements.iter().enumerate() {
            let dk = self.alice_dims[k];
            if meas.len() != s.n_inputs {
                return Err(invalid("parties must share the number of inputs"));
            }
            for povm in meas {
                if povm.len() != s.n_outcomes {
                    return Err(invalid("inputs must share the number of outcomes"));
                }
                let mut sum = linalg::zeros(dk);
                for p in povm {
                    if p.shape() != (dk, dk) {
                        return Err(Error::DimensionMismatch("projector dimension".into()));
                    }
                    if linalg::max_abs_diff(&(p * p), p) > tol || linalg::hermiticity_residual(p) > tol {
                        return Err(invalid(format!("party {} has a non-projective element", k + 1)));
                    }
                    sum += p;
                }
                if linalg::max_abs_diff(&sum, &linalg::identity(dk)) > tol {
                    return Err(invalid(format!("party {} has an incomplete measurement", k + 1)));
                }
            }
        }
        let du = self.aux_dim * self.bob_dim;
        for u in &self.unitaries {
            if u.shape() != (du, du) {
                return Err(Error::DimensionMismatch("unitary dimension".into()));
            }
            if linalg::max_abs_diff(&(u.adjoint() * u), &linalg::identity(du)) > tol {
                return Err(invalid("Bob transformation is not unitary"));
            }
        }
        Ok(())
    }

    /// `σ_{a⃗|x⃗ y} = Tr_{A, B_aux}[(⊗_k Π_{a_k|x_k} ⊗ U_y) ρ′ (…)†]`.
    pub fn assemblage(&self) -> Result<Assemblage> {
        self.check(REALIZATION_TOL)?;
        let s = self.scenario()?;
        let dims = self.dims();
        let n = s.n_alices;
        let d = self.bob_dim;
        let mut blocks = vec![linalg::zeros(d); s.n_blocks()];
        for (y, u) in self.unitaries.iter().enumerate() {
            let rotated = linalg::apply_local(&self.state, &dims, n, 2, u);
            for x in s.input_tuples() {
                for a in s.outcome_tuples() {
                    let mut phi = rotated.clone();
                    for k in 0..n {
                        phi = linalg::apply_local(&phi, &dims, k, 1, &self.measurements[k][x[k]][a[k]]);
                    }
                    blocks[s.block_index(&a, &x, y)] = linalg::reduce_to_last(&phi, d);
                }
            }
        }
        Assemblage::new(s, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, ONE, ZERO};

    fn basis_projectors() -> Vec<CMat> {
        vec![
            CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]),
            CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]),
        ]
    }

    fn bell_realization() -> QuantumRealization {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = CVec::from_vec(vec![c64(h, 0.0), ZERO, ZERO, c64(h, 0.0)]);
        let plus = CMat::from_element(2, 2, c64(0.5, 0.0));
        let minus = linalg::identity(2) - &plus;
        let pauli_x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        QuantumRealization {
            alice_dims: vec![2],
            aux_dim: 1,
            bob_dim: 2,
            state,
            measurements: vec![vec![basis_projectors(), vec![plus, minus]]],
            unitaries: vec![linalg::identity(2), pauli_x],
        }
    }

    #[test]
    fn bell_state_blocks() {
        let qr = bell_realization();
        let asm = qr.assemblage().unwrap();
        assert!(asm.validate(1e-12).pass());
        let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        for a in 0..2 {
            for xi in 0..2 {
                let s1 = asm.block(&[a], &[xi], 0);
                let s2 = asm.block(&[a], &[xi], 1);
                assert!(linalg::max_abs_diff(s2, &(&x * s1 * &x)) < 1e-14);
                assert!((s1.trace().re - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_non_projective() {
        let mut qr = bell_realization();
        qr.measurements[0][0][0] = qr.measurements[0][0][0].scale(0.5);
        assert!(qr.check(1e-10).is_err());
    }
}
