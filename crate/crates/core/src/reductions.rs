//! Maps from certificates to other hierarchies.
//!
//! * [`npa_project`]: scalar moment matrix over Bob-free words,
//!   `Γ̃(v, w) = Tr Γ(v, w) / d`.
//! * [`extended_correlations`]: Bob measures a POVM `{N_k}` on his system.
//! * [`jmrw_from_gamma`] and [`gamma_from_jmrw`]: conversions between
//!   certificates with a single Bob input and block moment matrices `Δ`
//!   over Bob-free words, whose data are `Δ(∅, ∅) = ρ_B` and
//!   `Δ(∅, a_Ω|x_Ω) = σ_{a_Ω|x_Ω}`.

use num_complex::Complex64;

use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::moment::{MomentIndex, MomentMatrix};
use crate::report::ValidationReport;
use crate::scenario::ScenarioSpec;
use crate::words::{canonicalize_unchecked, Canon, Letter, Word, WordSet};

/// Scalar moment matrix over the Bob-free words of a certificate.
#[derive(Clone, Debug)]
pub struct NpaMatrix {
    pub words: WordSet,
    pub matrix: CMat,
}

impl NpaMatrix {
    pub fn entry(&self, v: &Word, w: &Word) -> Option<Complex64> {
        let i = self.words.find(v)?;
        let j = self.words.find(w)?;
        Some(self.matrix[(i, j)])
    }

    /// `Γ̃(∅, a_Ω|x_Ω)`; `None` when the word is longer than the level.
    pub fn marginal(&self, omega: &[usize], a: &[usize], x: &[usize]) -> Option<f64> {
        let w = Word(omega.iter().enumerate().map(|(i, &k)| Letter::meas(k, a[i], x[i])).collect());
        self.entry(&Word::empty(), &w).map(|z| z.re)
    }

    /// Hermiticity, positivity, normalisation and the equivalence ties and
    /// null entries of the Bob-free word engine.
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        let index = MomentIndex::from_words(self.words.clone())?;
        let mut rep = ValidationReport::new(tol);
        rep.record("hermitian", linalg::hermiticity_residual(&self.matrix));
        rep.record("psd", -linalg::min_eigenvalue(&self.matrix));
        rep.record("normalization", (self.matrix[(0, 0)] - c64(1.0, 0.0)).norm());
        let n = index.size();
        let mut first: Vec<Option<Complex64>> = vec![None; index.n_classes()];
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                match index.entry(i, j) {
                    None => rep.record("null_entries", z.norm()),
                    Some(e) => {
                        let z = if e.dagger { z.conj() } else { z };
                        match first[e.class] {
                            Some(f) => rep.record("equivalences", (f - z).norm()),
                            None => first[e.class] = Some(z),
                        }
                    }
                }
            }
        }
        rep.record("null_entries", 0.0);
        rep.record("equivalences", 0.0);
        Ok(rep)
    }
}

/// `Γ̃(v, w) = Tr Γ(v, w) / d` for Bob-free `v, w`.
pub fn npa_project(gamma: &MomentMatrix) -> Result<NpaMatrix> {
    let s = gamma.index.scenario();
    let words = WordSet::without_bob(s, gamma.index.level())?;
    let d = gamma.dim() as f64;
    let n = words.len();
    let pos: Vec<usize> = words
        .iter()
        .map(|w| gamma.index.words.index_of(w).expect("Bob-free words are member words"))
        .collect();
    let matrix = CMat::from_fn(n, n, |i, j| gamma.entry(pos[i], pos[j]).trace() / d);
    Ok(NpaMatrix { words, matrix })
}

/// `p(a⃗ k | x⃗ y)` for a POVM `{N_k}` on Bob's system.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedCorrelations {
    pub scenario: ScenarioSpec,
    pub n_povm: usize,
    /// Indexed `[(block_index(a⃗, x⃗, y)) * n_povm + k]`.
    pub values: Vec<f64>,
}

impl ExtendedCorrelations {
    pub fn get(&self, a: &[usize], k: usize, x: &[usize], y: usize) -> f64 {
        self.values[self.scenario.block_index(a, x, y) * self.n_povm + k]
    }
}

pub const POVM_TOL: f64 = 1e-10;

pub fn check_povm(povm: &[CMat], d: usize) -> Result<()> {
    if povm.is_empty() || povm.iter().any(|e| e.shape() != (d, d)) {
        return Err(Error::DimensionMismatch("POVM elements must be d x d".into()));
    }
    let mut total = linalg::zeros(d);
    for e in povm {
        if linalg::hermiticity_residual(e) > POVM_TOL || linalg::min_eigenvalue(e) < -POVM_TOL {
            return Err(invalid("POVM elements must be positive semidefinite"));
        }
        total += e;
    }
    if linalg::max_abs_diff(&total, &linalg::identity(d)) > POVM_TOL {
        return Err(invalid("POVM elements must sum to the identity"));
    }
    Ok(())
}

/// `Γ(y, a⃗|x⃗)` for a full outcome tuple; outcome `0` is recovered by
/// completeness from words without that party.
fn outcome_block(gamma: &MomentMatrix, a: &[Option<usize>], x: &[usize], y: usize) -> Result<CMat> {
    if let Some(k) = a.iter().position(|v| *v == Some(0)) {
        let s = gamma.index.scenario();
        let mut rest = a.to_vec();
        rest[k] = None;
        let mut out = outcome_block(gamma, &rest, x, y)?;
        for b in 1..s.n_outcomes {
            rest[k] = Some(b);
            out -= outcome_block(gamma, &rest, x, y)?;
        }
        return Ok(out);
    }
    let w = Word(
        a.iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|b| Letter::meas(k, b, x[k])))
            .collect(),
    );
    gamma
        .entry_words(&Word::letter(Letter::BobInput(y)), &w)
        .ok_or_else(|| invalid(format!("word `{w}` is not in the level-{} word set", gamma.index.level())))
}

/// `p(a⃗ k|x⃗ y) = d Tr[Γ(y, a⃗|x⃗) N_kᵀ]`, which equals `Tr[σ_{a⃗|x⃗y} N_k]`
/// on certificates. Needs level `≥ N`.
pub fn extended_correlations(gamma: &MomentMatrix, povm: &[CMat]) -> Result<ExtendedCorrelations> {
    let s = *gamma.index.scenario();
    let d = s.bob_dim;
    check_povm(povm, d)?;
    if gamma.index.level() < s.n_alices {
        return Err(invalid("extended correlations need level at least the number of Alices"));
    }
    let mut values = vec![0.0; s.n_blocks() * povm.len()];
    for y in 0..s.n_bob_inputs {
        for x in s.input_tuples() {
            for a in s.outcome_tuples() {
                let opt: Vec<Option<usize>> = a.iter().map(|&v| Some(v)).collect();
                let g = outcome_block(gamma, &opt, &x, y)?;
                let b = s.block_index(&a, &x, y);
                for (k, n_k) in povm.iter().enumerate() {
                    values[b * povm.len() + k] = d as f64 * (&g * n_k.transpose()).trace().re;
                }
            }
        }
    }
    Ok(ExtendedCorrelations { scenario: s, n_povm: povm.len(), values })
}

/// `ξ(X) = d Tr(X) I − X`.
pub fn xi(x: &CMat) -> CMat {
    let d = x.nrows();
    linalg::identity(d) * (x.trace() * d as f64) - x
}

/// `y`-free moment matrix `Δ` over `S̃_level`, stored by class.
#[derive(Clone, Debug)]
pub struct JmrwMatrix {
    pub moments: MomentMatrix,
}

impl JmrwMatrix {
    pub fn level(&self) -> usize {
        self.moments.index.level()
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        self.moments.index.scenario()
    }

    /// Positivity, ties, null entries and the data `Δ(∅, ∅) = ρ_B`,
    /// `Δ(∅, a_Ω|x_Ω) = σ_{a_Ω|x_Ω}` for the single-input assemblage `asm`.
    pub fn validate(&self, asm: &Assemblage, tol: f64) -> Result<ValidationReport> {
        let s = self.scenario();
        if asm.scenario != *s || s.n_bob_inputs != 1 {
            return Err(Error::DimensionMismatch("assemblage must match and have one Bob input".into()));
        }
        let m = &self.moments;
        let mut rep = ValidationReport::new(tol);
        let big = m.assemble();
        rep.record("hermitian", linalg::hermiticity_residual(&big));
        rep.record("psd", -linalg::min_eigenvalue(&big));
        rep.record("null_entries", 0.0);
        for (c, sa) in m.index.self_adjoint.iter().enumerate() {
            if *sa {
                rep.record("equivalences", linalg::hermiticity_residual(&m.blocks[c]));
            }
        }
        rep.record("equivalences", 0.0);
        let rho = asm.bob_marginal(0);
        let e = m.word_value(&Word::empty()).expect("empty word has a class");
        rep.record("bob_marginal", linalg::max_abs_diff(&e, &rho));
        for mask in 1usize..(1 << s.n_alices) {
            let omega: Vec<usize> = (0..s.n_alices).filter(|k| mask & (1 << k) != 0).collect();
            if omega.len() > m.index.level() {
                continue;
            }
            for x in ScenarioSpec::tuples(s.n_inputs, omega.len()) {
                for a0 in ScenarioSpec::tuples(s.n_outcomes - 1, omega.len()) {
                    let a: Vec<usize> = a0.iter().map(|v| v + 1).collect();
                    let w = Word(omega.iter().enumerate().map(|(i, &k)| Letter::meas(k, a[i], x[i])).collect());
                    let got = m.entry_words(&Word::empty(), &w).expect("short words are members");
                    rep.record("data_blocks", linalg::max_abs_diff(&got, &asm.marginal(&omega, &a, &x, 0)));
                }
            }
        }
        Ok(rep)
    }
}

fn require_single_input(s: &ScenarioSpec) -> Result<()> {
    if s.n_bob_inputs != 1 {
        return Err(invalid("conversion requires exactly one Bob input"));
    }
    Ok(())
}

fn append_y(w: &Word, s: &ScenarioSpec) -> Option<Word> {
    let mut letters = w.letters().to_vec();
    letters.push(Letter::BobInput(0));
    match canonicalize_unchecked(&Word(letters), s) {
        Canon::Word(u) => Some(u),
        Canon::Null => None,
    }
}

/// `Δ(v, w) = d conj Γ(v, w y)`, entrywise complex conjugation. This agrees
/// with the blockwise transpose on Hermitian entries (in particular on all
/// data entries) and, unlike it, keeps `Δ` positive. The entry for `v, w ∈ S̃_n` needs the class of
/// `v† w y`, which a level-`n` certificate holds whenever `|v| < n` or
/// `|w| < n` and often otherwise; the output has the largest level `≤ n`
/// for which every class is available (at least `n − 1`).
pub fn jmrw_from_gamma(gamma: &MomentMatrix) -> Result<JmrwMatrix> {
    let s = *gamma.index.scenario();
    require_single_input(&s)?;
    let d = gamma.dim() as f64;
    let mut level = gamma.index.level();
    while level >= 1 {
        let index = MomentIndex::build_without_bob(&s, level)?;
        let blocks: Option<Vec<CMat>> = index
            .classes
            .iter()
            .map(|u| {
                let uy = append_y(u, &s)?;
                Some(gamma.word_value(&uy)?.conjugate() * c64(d, 0.0))
            })
            .collect();
        if let Some(blocks) = blocks {
            return Ok(JmrwMatrix { moments: MomentMatrix::new(index, blocks)? });
        }
        level -= 1;
    }
    Err(invalid("certificate does not determine a level-1 JMRW matrix; use level 2 or more"))
}

/// `Γ(α, β) = conj Tr Δ(α, β) I` for Bob-free entries and
/// `Γ(v, w y) = conj Δ(α′, β′) / d` otherwise, where the primes strip the Bob
/// letter from the canonical form.
pub fn gamma_from_jmrw(delta: &JmrwMatrix) -> Result<MomentMatrix> {
    let s = *delta.scenario();
    require_single_input(&s)?;
    let d = s.bob_dim;
    let index = MomentIndex::build(&s, delta.level())?;
    let blocks = index
        .classes
        .iter()
        .map(|u| {
            let stripped = u.strip_bob();
            let v = delta
                .moments
                .word_value(&stripped)
                .ok_or_else(|| invalid(format!("no moment for `{stripped}`")))?;
            Ok(if u.has_bob() {
                v.conjugate() / c64(d as f64, 0.0)
            } else {
                linalg::identity(d) * v.trace().conj()
            })
        })
        .collect::<Result<Vec<CMat>>>()?;
    MomentMatrix::new(index, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random_quantum, random_density, rng, QuantumDims};
    use crate::moment::certificate_constraints;
    use crate::oracle::reference_moment_matrix;

    fn quantum(seed: u64, s: &ScenarioSpec, level: usize) -> (MomentMatrix, Assemblage) {
        let dims = QuantumDims { alice_dims: vec![2; s.n_alices], aux_dim: 2 };
        let qr = gen_random_quantum(seed, s, &dims).unwrap();
        (reference_moment_matrix(&qr, level).unwrap(), qr.assemblage().unwrap())
    }

    #[test]
    fn npa_projection_matches_correlations() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let (gamma, asm) = quantum(4, &s, 2);
        let npa = npa_project(&gamma).unwrap();
        assert!(npa.validate(1e-9).unwrap().pass());
        assert_eq!(npa.words.len(), 5);
        for x in 0..2 {
            let p = asm.block(&[1], &[x], 0).trace().re;
            assert!((npa.marginal(&[0], &[1], &[x]).unwrap() - p).abs() < 1e-10);
        }
    }

    #[test]
    fn extended_correlations_normalise() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let (gamma, asm) = quantum(6, &s, 2);
        let e0 = CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]));
        let e1 = linalg::identity(2) - &e0;
        let p = extended_correlations(&gamma, &[e0.clone(), e1]).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let total: f64 = (0..2).flat_map(|a| (0..2).map(move |k| (a, k))).map(|(a, k)| p.get(&[a], k, &[x], y)).sum();
                assert!((total - 1.0).abs() < 1e-9);
                for a in 0..2 {
                    let want = (asm.block(&[a], &[x], y) * &e0).trace().re;
                    assert!((p.get(&[a], 0, &[x], y) - want).abs() < 1e-10);
                }
            }
        }
        assert!(extended_correlations(&gamma, &[e0]).is_err());
    }

    #[test]
    fn jmrw_round_trip() {
        let s = ScenarioSpec::new(1, 2, 2, 1, 2).unwrap();
        let (gamma, asm) = quantum(8, &s, 3);
        let delta = jmrw_from_gamma(&gamma).unwrap();
        assert!(delta.level() >= 2);
        let rep = delta.validate(&asm, 1e-8).unwrap();
        assert!(rep.pass(), "{rep}");
        let back = gamma_from_jmrw(&delta).unwrap();
        let cons = certificate_constraints(&back.index, &asm).unwrap();
        let rep = back.validate(&cons, 1e-8);
        assert!(rep.pass(), "{rep}");
        let again = jmrw_from_gamma(&back).unwrap();
        let w = Word::parse("1|2").unwrap();
        let e = Word::empty();
        let diff = linalg::max_abs_diff(
            &again.moments.entry_words(&e, &w).unwrap(),
            &delta.moments.entry_words(&e, &w).unwrap(),
        );
        assert!(diff < 1e-12);
    }

    #[test]
    fn xi_is_positive_on_states() {
        let mut r = rng(1);
        for d in 1..=4 {
            let x = random_density(&mut r, d);
            assert!(linalg::min_eigenvalue(&xi(&x)) >= -1e-12);
        }
    }

    #[test]
    fn conversions_need_one_input() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let (gamma, _) = quantum(1, &s, 1);
        assert!(jmrw_from_gamma(&gamma).is_err());
        let (gamma, _) = quantum(1, &s.with_bob_inputs(1), 1);
        assert!(jmrw_from_gamma(&gamma).is_err());
    }
}
