//! Explicit moment matrices of quantum realisations.
//!
//! Bob's input `y` is turned into a two-outcome projective measurement
//! `Ψ_{1|y} = (U_y† ⊗ I)(I_aux ⊗ Φ₁)(U_y ⊗ I)` on `B_aux ⊗ B_(i) ⊗ B′`,
//! where `Φ₁` projects onto `|φ⁺⟩ = d^{-1/2} Σ_j |j⟩|j⟩` of `B_(i) ⊗ B′`.
//! With `O_{a|x}` the embedded projectors, `O_y = I ⊗ Ψ_{1|y}` and
//! `ρ̃ = |ψ⟩⟨ψ| ⊗ I_{B′}`, the blocks
//! `Γ(v, w) = Tr_{A B_aux B_(i)}[O_v† O_w ρ̃]` form a certificate for the
//! realised assemblage.
//!
//! Subsystem order is `A_1 ⊗ … ⊗ A_N ⊗ B_aux ⊗ B_(i) ⊗ B′`.

use crate::error::{invalid, Result};
use crate::linalg::{self, c64, CMat, CVec};
use crate::moment::{MomentIndex, MomentMatrix};
use crate::quantum::{QuantumRealization, REALIZATION_TOL};
use crate::words::{Letter, Word};

/// Default cap on the total Hilbert-space dimension of the oracle.
pub const DEFAULT_DIM_CAP: usize = 64;

/// `Φ₁ = |φ⁺⟩⟨φ⁺|` on `C^d ⊗ C^d`.
pub fn max_entangled_projector(d: usize) -> CMat {
    let mut phi = CVec::zeros(d * d);
    let amp = 1.0 / (d as f64).sqrt();
    for j in 0..d {
        phi[j * d + j] = c64(amp, 0.0);
    }
    linalg::outer(&phi, &phi)
}

/// `(Ψ_{1|y}, Ψ_{2|y})` on `B_aux ⊗ B_(i) ⊗ B′`.
pub fn bob_measurement(qr: &QuantumRealization, y: usize) -> Result<(CMat, CMat)> {
    let u = qr
        .unitaries
        .get(y)
        .ok_or_else(|| invalid(format!("Bob input {} out of range", y + 1)))?;
    let d = qr.bob_dim;
    let phi = linalg::kron(&linalg::identity(qr.aux_dim), &max_entangled_projector(d));
    let ud = linalg::kron(u, &linalg::identity(d));
    let psi1 = ud.adjoint() * phi * &ud;
    let psi2 = linalg::identity(psi1.nrows()) - &psi1;
    Ok((psi1, psi2))
}

/// Dense operators for every single letter.
#[derive(Clone, Debug)]
pub struct OperatorRep {
    pub qr: QuantumRealization,
    pub dims: Vec<usize>,
    /// `meas[party][x][a]` for outcomes `a ≥ 1` (index `a`).
    meas: Vec<Vec<Vec<CMat>>>,
    bob: Vec<CMat>,
}

impl OperatorRep {
    pub fn new(qr: &QuantumRealization, dim_cap: usize) -> Result<Self> {
        qr.check(REALIZATION_TOL)?;
        let n = qr.alice_dims.len();
        let mut dims = qr.dims();
        dims.push(qr.bob_dim);
        let total: usize = dims.iter().product();
        if total > dim_cap {
            return Err(invalid(format!(
                "oracle dimension {total} exceeds the cap of {dim_cap}"
            )));
        }
        let meas = qr
            .measurements
            .iter()
            .enumerate()
            .map(|(k, per_x)| {
                per_x
                    .iter()
                    .map(|povm| povm.iter().map(|p| linalg::embed(p, &dims, k, 1)).collect())
                    .collect()
            })
            .collect();
        let mut bob = Vec::with_capacity(qr.unitaries.len());
        for y in 0..qr.unitaries.len() {
            let (psi1, _) = bob_measurement(qr, y)?;
            bob.push(linalg::embed(&psi1, &dims, n, 3));
        }
        Ok(OperatorRep { qr: qr.clone(), dims, meas, bob })
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn letter(&self, l: &Letter) -> CMat {
        match *l {
            Letter::Empty => linalg::identity(self.total_dim()),
            Letter::Meas { party, outcome, input } => self.meas[party][input][outcome].clone(),
            Letter::BobInput(y) => self.bob[y].clone(),
        }
    }

    /// `O_v = O_{v_1} ⋯ O_{v_k}`.
    pub fn word(&self, v: &Word) -> CMat {
        v.letters()
            .iter()
            .fold(linalg::identity(self.total_dim()), |acc, l| acc * self.letter(l))
    }

    /// `O_v |φ⟩`, applying letters right to left.
    pub fn apply(&self, v: &Word, phi: &CVec) -> CVec {
        let mut out = phi.clone();
        for l in v.letters().iter().rev() {
            match *l {
                Letter::Empty => {}
                Letter::Meas { party, outcome, input } => out = &self.meas[party][input][outcome] * out,
                Letter::BobInput(y) => out = &self.bob[y] * out,
            }
        }
        out
    }

    /// `|ψ⟩ ⊗ |j⟩_{B′}`.
    pub fn purified(&self, j: usize) -> CVec {
        let d = self.qr.bob_dim;
        let mut e = CVec::zeros(d);
        e[j] = c64(1.0, 0.0);
        self.qr.state.kronecker(&e)
    }
}

/// Certificate built from the realisation. The second value is the largest
/// disagreement between the Gram matrix and the class blocks, which vanishes
/// when the word equivalences hold for the operators.
pub fn reference_moment_matrix_checked(
    qr: &QuantumRealization,
    level: usize,
    dim_cap: usize,
) -> Result<(MomentMatrix, f64)> {
    let rep = OperatorRep::new(qr, dim_cap)?;
    let s = qr.scenario()?;
    let index = MomentIndex::build(&s, level)?;
    let d = s.bob_dim;
    let n = index.size();
    let big_d = rep.total_dim();
    let mut vecs = CMat::zeros(big_d, n * d);
    for (i, w) in index.words.iter().enumerate() {
        for j in 0..d {
            vecs.set_column(i * d + j, &rep.apply(w, &rep.purified(j)));
        }
    }
    let gram = vecs.adjoint() * &vecs;
    let mut blocks: Vec<Option<CMat>> = vec![None; index.n_classes()];
    let mut tie: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = gram.view((i * d, j * d), (d, d)).into_owned();
            match index.entry(i, j) {
                None => tie = tie.max(linalg::max_abs(&g)),
                Some(e) => {
                    let oriented = if e.dagger { g.adjoint() } else { g };
                    match &blocks[e.class] {
                        Some(b) => tie = tie.max(linalg::max_abs_diff(b, &oriented)),
                        None => blocks[e.class] = Some(oriented),
                    }
                }
            }
        }
    }
    let blocks = blocks
        .into_iter()
        .map(|b| b.expect("every class occurs in the table"))
        .collect();
    Ok((MomentMatrix::new(index, blocks)?, tie))
}

pub fn reference_moment_matrix(qr: &QuantumRealization, level: usize) -> Result<MomentMatrix> {
    Ok(reference_moment_matrix_checked(qr, level, DEFAULT_DIM_CAP)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random_quantum, QuantumDims};
    use crate::linalg::{ONE, ZERO};
    use crate::moment::certificate_constraints;
    use crate::scenario::ScenarioSpec;

    fn random_qr(seed: u64, aux: usize) -> QuantumRealization {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let dims = QuantumDims { alice_dims: vec![2], aux_dim: aux };
        gen_random_quantum(seed, &s, &dims).unwrap()
    }

    #[test]
    fn bob_measurement_is_projective() {
        let qr = random_qr(4, 2);
        for y in 0..2 {
            let (p1, p2) = bob_measurement(&qr, y).unwrap();
            assert!(linalg::max_abs_diff(&(&p1 * &p1), &p1) < 1e-12);
            assert!(linalg::hermiticity_residual(&p1) < 1e-12);
            assert!(linalg::max_abs_diff(&(p1 + p2), &linalg::identity(8)) < 1e-12);
        }
    }

    #[test]
    fn bob_measurement_with_flip() {
        let mut qr = random_qr(1, 1);
        let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        qr.unitaries = vec![linalg::identity(2), x.clone()];
        let phi = max_entangled_projector(2);
        let (p, _) = bob_measurement(&qr, 0).unwrap();
        assert!(linalg::max_abs_diff(&p, &phi) < 1e-14);
        let xi = linalg::kron(&x, &linalg::identity(2));
        let (p, _) = bob_measurement(&qr, 1).unwrap();
        assert!(linalg::max_abs_diff(&p, &(&xi * &phi * &xi)) < 1e-14);
    }

    #[test]
    fn operators_respect_equivalences() {
        let qr = random_qr(9, 2);
        let rep = OperatorRep::new(&qr, 64).unwrap();
        let w = |t: &str| Word::parse(t).unwrap();
        let ay = rep.word(&w("1|1;1"));
        let ya = rep.word(&w(";1.1|1"));
        assert!(linalg::max_abs_diff(&ay, &ya) < 1e-12);
        assert!(linalg::max_abs_diff(&rep.word(&Word::empty()), &linalg::identity(16)) < 1e-15);
        let v = w("1|1;2.1|2");
        assert!(linalg::max_abs_diff(&rep.word(&v).adjoint(), &rep.word(&v.dagger())) < 1e-12);
    }

    #[test]
    fn orthogonal_outcomes_give_zero() {
        let s = ScenarioSpec::new(1, 3, 1, 1, 2).unwrap();
        let dims = QuantumDims { alice_dims: vec![3], aux_dim: 1 };
        let qr = gen_random_quantum(2, &s, &dims).unwrap();
        let rep = OperatorRep::new(&qr, 64).unwrap();
        let z = rep.word(&Word::parse("1|1.2|1").unwrap());
        assert!(linalg::max_abs(&z) < 1e-12);
    }

    #[test]
    fn reference_matrix_is_certificate() {
        let qr = random_qr(21, 2);
        let (gamma, tie) = reference_moment_matrix_checked(&qr, 2, 64).unwrap();
        assert!(tie < 1e-12);
        let asm = qr.assemblage().unwrap();
        let cons = certificate_constraints(&gamma.index, &asm).unwrap();
        let rep = gamma.validate(&cons, 1e-8);
        assert!(rep.pass(), "{rep}");
    }

    #[test]
    fn partial_traces_agree() {
        let qr = random_qr(5, 2);
        let rep = OperatorRep::new(&qr, 64).unwrap();
        let rho = linalg::kron(&linalg::outer(&qr.state, &qr.state), &linalg::identity(2));
        let direct = linalg::partial_trace(&rho, &rep.dims, &[3]);
        let mut m = rho.clone();
        let mut dims = rep.dims.clone();
        for _ in 0..3 {
            let keep: Vec<usize> = (1..dims.len()).collect();
            m = linalg::partial_trace(&m, &dims, &keep);
            dims.remove(0);
        }
        assert!(linalg::max_abs_diff(&direct, &m) < 1e-12);
        assert!((direct.trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_cap() {
        let qr = random_qr(1, 2);
        assert!(OperatorRep::new(&qr, 8).is_err());
    }
}
