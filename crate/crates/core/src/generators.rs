//! Seeded random test instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::assemblage::Assemblage;
use crate::error::{invalid, Result};
use crate::linalg::{self, c64, CMat, CVec, ONE, ZERO};
use crate::quantum::QuantumRealization;
use crate::scenario::ScenarioSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = c64(gauss(rng), gauss(rng));
        }
    }
    m
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| c64(gauss(rng), gauss(rng))))
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    let v = gaussian_vector(rng, n);
    let norm = v.norm();
    v.unscale(norm)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::hermitian_part(&gaussian_matrix(rng, n, n))
}

/// Unit-trace density matrix from a square Ginibre matrix.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    let rho = &g * g.adjoint();
    let t = rho.trace().re;
    rho.unscale(t)
}

/// Unitary from the QR decomposition of a Gaussian matrix, with the phases
/// of `R`'s diagonal absorbed.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Projective measurement with `n_outcomes` elements on dimension `dim`:
/// eigenvectors of a random Hermitian matrix grouped contiguously.
pub fn random_projective(rng: &mut ChaCha8Rng, dim: usize, n_outcomes: usize) -> Result<Vec<CMat>> {
    if dim < n_outcomes {
        return Err(invalid(format!(
            "cannot split dimension {dim} into {n_outcomes} nonzero projectors"
        )));
    }
    let (_, vecs) = linalg::eigh(&random_hermitian(rng, dim));
    let base = dim / n_outcomes;
    let extra = dim % n_outcomes;
    let mut out = Vec::with_capacity(n_outcomes);
    let mut col = 0;
    for a in 0..n_outcomes {
        let size = base + usize::from(a < extra);
        let block = vecs.columns(col, size).into_owned();
        out.push(&block * block.adjoint());
        col += size;
    }
    Ok(out)
}

/// Hilbert-space dimensions of a random realisation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantumDims {
    pub alice_dims: Vec<usize>,
    pub aux_dim: usize,
}

impl QuantumDims {
    /// Each Alice gets `max(|A|, d)` dimensions; no auxiliary system.
    pub fn default_for(s: &ScenarioSpec) -> Self {
        QuantumDims {
            alice_dims: vec![s.n_outcomes.max(s.bob_dim); s.n_alices],
            aux_dim: 1,
        }
    }
}

pub fn gen_random_quantum(seed: u64, s: &ScenarioSpec, dims: &QuantumDims) -> Result<QuantumRealization> {
    s.check()?;
    if dims.alice_dims.len() != s.n_alices || dims.aux_dim == 0 {
        return Err(invalid("dimensions do not match the scenario"));
    }
    let mut rng = rng(seed);
    let total: usize = dims.alice_dims.iter().product::<usize>() * dims.aux_dim * s.bob_dim;
    let state = random_state(&mut rng, total);
    let mut measurements = Vec::with_capacity(s.n_alices);
    for &dk in &dims.alice_dims {
        let mut per_input = Vec::with_capacity(s.n_inputs);
        for _ in 0..s.n_inputs {
            per_input.push(random_projective(&mut rng, dk, s.n_outcomes)?);
        }
        measurements.push(per_input);
    }
    let unitaries = (0..s.n_bob_inputs)
        .map(|_| random_unitary(&mut rng, dims.aux_dim * s.bob_dim))
        .collect();
    Ok(QuantumRealization {
        alice_dims: dims.alice_dims.clone(),
        aux_dim: dims.aux_dim,
        bob_dim: s.bob_dim,
        state,
        measurements,
        unitaries,
    })
}

/// Random non-signalling assemblage for one Alice and no Bob input:
/// `σ_{a|x} = ρ^{1/2} E_{a|x} ρ^{1/2}` for random POVMs `E_{·|x}`.
pub fn gen_nonsignalling(seed: u64, s: &ScenarioSpec) -> Result<Assemblage> {
    s.check()?;
    if s.n_alices != 1 || s.n_bob_inputs != 1 {
        return Err(invalid("the non-signalling generator needs one Alice and one Bob input"));
    }
    let d = s.bob_dim;
    let mut rng = rng(seed);
    let rho = random_density(&mut rng, d);
    let root = linalg::psd_sqrt(&rho);
    let mut blocks = vec![linalg::zeros(d); s.n_blocks()];
    for x in 0..s.n_inputs {
        let weights: Vec<CMat> = (0..s.n_outcomes)
            .map(|_| {
                let g = gaussian_matrix(&mut rng, d, d);
                &g * g.adjoint()
            })
            .collect();
        let total = weights.iter().fold(linalg::zeros(d), |acc, w| acc + w);
        let inv_root = linalg::spectral_map(&total, |v| 1.0 / v.sqrt());
        let mut parts: Vec<CMat> = weights
            .iter()
            .map(|w| linalg::hermitian_part(&(&root * (&inv_root * w * &inv_root) * &root)))
            .collect();
        // Put the rounding error of the decomposition into the last part so
        // the parts sum to ρ exactly up to one subtraction.
        let head = parts[..s.n_outcomes - 1]
            .iter()
            .fold(linalg::zeros(d), |acc, p| acc + p);
        let last = &rho - head;
        if linalg::min_eigenvalue(&last) >= 0.0 {
            parts[s.n_outcomes - 1] = last;
        }
        for (a, p) in parts.into_iter().enumerate() {
            blocks[s.block_index(&[a], &[x], 0)] = p;
        }
    }
    Assemblage::new(*s, blocks)
}

fn mub_projectors(x: usize) -> [CMat; 2] {
    let h = 0.5;
    let m = match x {
        0 => [ONE, ZERO, ZERO, ZERO],
        1 => [c64(h, 0.0), c64(h, 0.0), c64(h, 0.0), c64(h, 0.0)],
        _ => [c64(h, 0.0), c64(0.0, -h), c64(0.0, h), c64(h, 0.0)],
    };
    let p = CMat::from_row_slice(2, 2, &m);
    let q = linalg::identity(2) - &p;
    [p, q]
}

/// Qubit assemblage whose second Bob input sees the transpose of the first.
///
/// The first slice comes from a maximally entangled pair with Alice measuring
/// the first `|X|` of three randomly rotated mutually unbiased bases, so
/// `σ_{a|x,1} = Pᵀ_{a|x}/2` and `σ_{a|x,2} = P_{a|x}/2`. Requires one Alice,
/// two outcomes, at most three inputs, two Bob inputs and `d = 2`.
pub fn gen_transpose_twist(seed: u64, s: &ScenarioSpec) -> Result<Assemblage> {
    s.check()?;
    if s.n_alices != 1 || s.n_outcomes != 2 || s.n_bob_inputs != 2 || s.bob_dim != 2 || s.n_inputs > 3 {
        return Err(invalid(
            "the transpose-twist generator needs N=1, |A|=2, |X|<=3, |Y|=2, d=2",
        ));
    }
    let mut rng = rng(seed);
    let v = random_unitary(&mut rng, 2);
    Assemblage::from_fn(*s, |a, x, y| {
        let p = &v * &mub_projectors(x[0])[a[0]] * v.adjoint();
        let tau = linalg::transpose(&p).scale(0.5);
        if y == 0 {
            tau
        } else {
            linalg::transpose(&tau)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        let u = random_unitary(&mut r, 4);
        assert!(linalg::max_abs_diff(&(u.adjoint() * &u), &linalg::identity(4)) < 1e-12);
    }

    #[test]
    fn projective_rejects_small_dimension() {
        let mut r = rng(1);
        assert!(random_projective(&mut r, 2, 3).is_err());
        let povm = random_projective(&mut r, 5, 2).unwrap();
        assert!((povm[0].trace().re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn quantum_generator_is_deterministic() {
        let s = ScenarioSpec::new(2, 2, 2, 2, 2).unwrap();
        let dims = QuantumDims::default_for(&s);
        let q1 = gen_random_quantum(11, &s, &dims).unwrap();
        let q2 = gen_random_quantum(11, &s, &dims).unwrap();
        assert_eq!(q1, q2);
        q1.check(1e-10).unwrap();
        assert!(q1.assemblage().unwrap().validate(1e-9).pass());
    }

    #[test]
    fn nonsignalling_parts_sum_to_rho() {
        let s = ScenarioSpec::new(1, 3, 2, 1, 3).unwrap();
        let asm = gen_nonsignalling(5, &s).unwrap();
        assert!(asm.validate(1e-9).pass());
        let r0 = asm.marginal(&[], &[], &[], 0);
        let r1 = asm.marginal_at(&[], &[], &[], 0, &[1]);
        assert!(linalg::max_abs_diff(&r0, &r1) < 1e-13);
    }

    #[test]
    fn twist_is_valid() {
        let s = ScenarioSpec::new(1, 2, 3, 2, 2).unwrap();
        let asm = gen_transpose_twist(7, &s).unwrap();
        assert!(asm.validate(1e-9).pass());
    }
}
