//! Moment-matrix skeletons, certificate constraints and numeric validation.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::report::ValidationReport;
use crate::scenario::ScenarioSpec;
use crate::words::{self, alphabet, order_key, Canon, Letter, Word, WordSet, DEFAULT_WORD_CAP};

/// Location of an entry's value: class `class`, adjointed when `dagger`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Entry {
    pub class: usize,
    pub dagger: bool,
}

/// Entry table of a level-`n` moment matrix.
///
/// A class is the unordered pair `{u, u†}` of canonical words arising as
/// `v† w`; its representative is the smaller of the two in word-set order.
#[derive(Clone, Debug)]
pub struct MomentIndex {
    pub words: WordSet,
    /// Row-major `|S_n| × |S_n|` table; `None` marks null entries.
    pub entries: Vec<Option<Entry>>,
    pub classes: Vec<Word>,
    pub self_adjoint: Vec<bool>,
    /// Classes constrained to be multiples of the identity.
    pub scalar: Vec<bool>,
    lookup: HashMap<Word, Entry>,
}

impl MomentIndex {
    pub fn build(s: &ScenarioSpec, level: usize) -> Result<Self> {
        Self::from_words(WordSet::build(s, level, true, DEFAULT_WORD_CAP)?)
    }

    /// Index over the alphabet without Bob inputs.
    pub fn build_without_bob(s: &ScenarioSpec, level: usize) -> Result<Self> {
        Self::from_words(WordSet::build(s, level, false, DEFAULT_WORD_CAP)?)
    }

    pub fn from_words(words: WordSet) -> Result<Self> {
        let s = words.scenario;
        let n = words.len();
        let mut lookup: HashMap<Word, Entry> = HashMap::new();
        let mut classes: Vec<Word> = Vec::new();
        let mut self_adjoint = Vec::new();
        let mut entries = Vec::with_capacity(n * n);
        for v in words.iter() {
            for w in words.iter() {
                let u = match words::product(v, w, &s) {
                    Canon::Word(u) => u,
                    Canon::Null => {
                        entries.push(None);
                        continue;
                    }
                };
                if let Some(&e) = lookup.get(&u) {
                    entries.push(Some(e));
                    continue;
                }
                let ud = match words::canonicalize_unchecked(&u.dagger(), &s) {
                    Canon::Word(x) => x,
                    Canon::Null => unreachable!("adjoint of a non-null word is non-null"),
                };
                let class = classes.len();
                let sa = u == ud;
                let flipped = order_key(&ud, &s) < order_key(&u, &s);
                let (rep, other) = if flipped { (ud, u) } else { (u, ud) };
                lookup.insert(rep.clone(), Entry { class, dagger: false });
                if !sa {
                    lookup.insert(other, Entry { class, dagger: true });
                }
                classes.push(rep);
                self_adjoint.push(sa);
                entries.push(Some(Entry { class, dagger: flipped }));
            }
        }
        let mut index = MomentIndex {
            scalar: vec![false; classes.len()],
            words,
            entries,
            classes,
            self_adjoint,
            lookup,
        };
        let meas = alphabet(&s, false);
        for &l in &meas {
            for &m in &meas {
                if let Canon::Word(u) = words::canonicalize_unchecked(&Word(vec![l, m]), &s) {
                    if let Some(e) = index.lookup.get(&u) {
                        index.scalar[e.class] = true;
                    }
                }
            }
        }
        Ok(index)
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.words.scenario
    }

    pub fn level(&self) -> usize {
        self.words.level
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<Entry> {
        self.entries[i * self.size() + j]
    }

    /// Class holding the canonical word `u`, with the orientation of `u`.
    pub fn class_of_word(&self, u: &Word) -> Option<Entry> {
        self.lookup.get(u).copied()
    }

    /// Class of `v† w` for arbitrary words (canonicalised first).
    pub fn class_of(&self, v: &Word, w: &Word) -> Option<Entry> {
        match words::product(v, w, self.scenario()) {
            Canon::Word(u) => self.class_of_word(&u),
            Canon::Null => None,
        }
    }

    /// Class of the empty word.
    pub fn identity_class(&self) -> usize {
        self.entry(0, 0).expect("empty word is never null").class
    }

    pub fn n_null_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.is_none()).count()
    }
}

/// Which assemblage quantity a moment class is tied to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataLink {
    pub class: usize,
    /// Parties in `Ω`, increasing.
    pub omega: Vec<usize>,
    pub a: Vec<usize>,
    pub x: Vec<usize>,
    /// `None`: scalar link `Γ = Tr σ_{a_Ω|x_Ω, y=1} I`; `Some(y)`: block link
    /// `Γ = σᵀ_{a_Ω|x_Ω y} / d`.
    pub y: Option<usize>,
}

impl DataLink {
    pub fn word(&self) -> Word {
        let mut letters: Vec<Letter> = self
            .omega
            .iter()
            .enumerate()
            .map(|(i, &k)| Letter::meas(k, self.a[i], self.x[i]))
            .collect();
        if let Some(y) = self.y {
            letters.push(Letter::BobInput(y));
        }
        Word(letters)
    }

    /// Target value for the class representative.
    pub fn target(&self, asm: &Assemblage) -> CMat {
        let d = asm.dim();
        match self.y {
            None => {
                let t = asm.marginal(&self.omega, &self.a, &self.x, 0).trace();
                linalg::identity(d).scale(t.re)
            }
            Some(y) => {
                let m = asm.marginal(&self.omega, &self.a, &self.x, y);
                linalg::transpose(&m).unscale(d as f64)
            }
        }
    }
}

/// Data links for every word `a_Ω|x_Ω` and `a_Ω|x_Ω y` (including `Ω = ∅`
/// with `y`) that is a member of the index's word set.
pub fn data_links(index: &MomentIndex) -> Vec<DataLink> {
    let s = *index.scenario();
    let mut links = Vec::new();
    for mask in 0usize..(1 << s.n_alices) {
        let omega: Vec<usize> = (0..s.n_alices).filter(|k| mask & (1 << k) != 0).collect();
        let m = omega.len();
        for x in ScenarioSpec::tuples(s.n_inputs, m) {
            for a0 in ScenarioSpec::tuples(s.n_outcomes - 1, m) {
                let a: Vec<usize> = a0.iter().map(|v| v + 1).collect();
                let mut ys: Vec<Option<usize>> = Vec::new();
                if m > 0 {
                    ys.push(None);
                }
                if index.words.with_bob {
                    ys.extend((0..s.n_bob_inputs).map(Some));
                }
                for y in ys {
                    let mut link = DataLink { class: 0, omega: omega.clone(), a: a.clone(), x: x.clone(), y };
                    let w = link.word();
                    if index.words.index_of(&w).is_none() {
                        continue;
                    }
                    let e = index.class_of_word(&w).expect("member words have a class");
                    debug_assert!(!e.dagger);
                    link.class = e.class;
                    links.push(link);
                }
            }
        }
    }
    links
}

#[derive(Clone, Debug)]
pub struct DataConstraint {
    pub class: usize,
    pub label: String,
    pub target: CMat,
    pub scalar: bool,
}

/// Structural and data constraints of a certificate.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    pub identity_class: usize,
    pub null_entries: usize,
    pub scalar_classes: Vec<usize>,
    pub data: Vec<DataConstraint>,
}

const CONFLICT_TOL: f64 = 1e-9;

/// Constraints tying the index to `asm`.
pub fn certificate_constraints(index: &MomentIndex, asm: &Assemblage) -> Result<ConstraintSet> {
    if asm.scenario != *index.scenario() {
        return Err(Error::DimensionMismatch("assemblage scenario differs from index".into()));
    }
    let mut by_class: HashMap<usize, usize> = HashMap::new();
    let mut data: Vec<DataConstraint> = Vec::new();
    for link in data_links(index) {
        let target = link.target(asm);
        let label = link.word().to_string();
        if let Some(&k) = by_class.get(&link.class) {
            let diff = linalg::max_abs_diff(&data[k].target, &target);
            if diff > CONFLICT_TOL {
                return Err(Error::ConflictingTargets { class: label, residual: diff });
            }
            continue;
        }
        by_class.insert(link.class, data.len());
        data.push(DataConstraint { class: link.class, label, target, scalar: link.y.is_none() });
    }
    Ok(ConstraintSet {
        identity_class: index.identity_class(),
        null_entries: index.n_null_entries(),
        scalar_classes: (0..index.n_classes()).filter(|&c| index.scalar[c]).collect(),
        data,
    })
}

/// Structural constraints only.
pub fn structural_constraints(index: &MomentIndex) -> ConstraintSet {
    ConstraintSet {
        identity_class: index.identity_class(),
        null_entries: index.n_null_entries(),
        scalar_classes: (0..index.n_classes()).filter(|&c| index.scalar[c]).collect(),
        data: Vec::new(),
    }
}

/// A moment matrix stored as one `d × d` block per class.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub index: MomentIndex,
    pub blocks: Vec<CMat>,
}

impl MomentMatrix {
    pub fn new(index: MomentIndex, blocks: Vec<CMat>) -> Result<Self> {
        let d = index.scenario().bob_dim;
        if blocks.len() != index.n_classes() || blocks.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("one d x d block per class required".into()));
        }
        Ok(MomentMatrix { index, blocks })
    }

    pub fn dim(&self) -> usize {
        self.index.scenario().bob_dim
    }

    /// Block `Γ(v_i, v_j)`.
    pub fn entry(&self, i: usize, j: usize) -> CMat {
        match self.index.entry(i, j) {
            None => linalg::zeros(self.dim()),
            Some(Entry { class, dagger: false }) => self.blocks[class].clone(),
            Some(Entry { class, dagger: true }) => self.blocks[class].adjoint(),
        }
    }

    /// Block for an arbitrary pair of member words.
    pub fn entry_words(&self, v: &Word, w: &Word) -> Option<CMat> {
        let i = self.index.words.find(v)?;
        let j = self.index.words.find(w)?;
        Some(self.entry(i, j))
    }

    /// Value of the class of the canonical word `u`.
    pub fn word_value(&self, u: &Word) -> Option<CMat> {
        let e = self.index.class_of_word(u)?;
        Some(if e.dagger { self.blocks[e.class].adjoint() } else { self.blocks[e.class].clone() })
    }

    /// Full `(|S_n| d) × (|S_n| d)` matrix.
    pub fn assemble(&self) -> CMat {
        let n = self.index.size();
        let d = self.dim();
        let mut big = CMat::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                if self.index.entry(i, j).is_some() {
                    big.view_mut((i * d, j * d), (d, d)).copy_from(&self.entry(i, j));
                }
            }
        }
        big
    }

    /// Moment-matrix and certificate residuals, plus the two norm bounds
    /// every moment matrix obeys.
    pub fn validate(&self, constraints: &ConstraintSet, tol: f64) -> ValidationReport {
        let mut rep = ValidationReport::new(tol);
        let d = self.dim();
        let id = linalg::identity(d);
        let big = self.assemble();
        rep.record("hermitian", linalg::hermiticity_residual(&big));
        rep.record("psd", -linalg::min_eigenvalue(&big));
        rep.record(
            "identity_entry",
            linalg::max_abs_diff(&self.blocks[constraints.identity_class], &id),
        );
        // Null entries are structurally zero in this representation.
        rep.record("null_entries", 0.0);
        for &c in &constraints.scalar_classes {
            let b = &self.blocks[c];
            let mean = b.trace() / Complex64::new(d as f64, 0.0);
            rep.record("scalar_classes", linalg::max_abs_diff(b, &id.map(|z| z * mean)));
        }
        for dc in &constraints.data {
            let name = if dc.scalar { "data_scalar" } else { "data_block" };
            rep.record(name, linalg::max_abs_diff(&self.blocks[dc.class], &dc.target));
        }
        if constraints.data.is_empty() {
            rep.record("data_block", 0.0);
        }
        let n = self.index.size();
        for i in 0..n {
            let g = self.entry(i, i);
            rep.record("diagonal_bound", linalg::max_eigenvalue(&g) - 1.0);
        }
        for b in &self.blocks {
            rep.record("norm_bound", linalg::operator_norm(b) - 1.0);
        }
        rep
    }

    /// Restriction to the words of level `level` (a principal submatrix).
    pub fn restrict(&self, level: usize) -> Result<MomentMatrix> {
        if level == 0 || level > self.index.level() {
            return Err(crate::error::invalid("restriction level out of range"));
        }
        let small = MomentIndex::from_words(WordSet::build(
            self.index.scenario(),
            level,
            self.index.words.with_bob,
            DEFAULT_WORD_CAP,
        )?)?;
        let blocks = small
            .classes
            .iter()
            .map(|u| {
                self.word_value(u)
                    .expect("every lower-level class occurs at the higher level")
            })
            .collect();
        MomentMatrix::new(small, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scen() -> ScenarioSpec {
        ScenarioSpec::new(1, 2, 2, 2, 2).unwrap()
    }

    fn w(t: &str) -> Word {
        Word::parse(t).unwrap()
    }

    #[test]
    fn pairing_is_consistent() {
        let idx = MomentIndex::build(&ScenarioSpec::new(1, 3, 2, 2, 2).unwrap(), 2).unwrap();
        let n = idx.size();
        for i in 0..n {
            for j in 0..n {
                match (idx.entry(i, j), idx.entry(j, i)) {
                    (None, None) => {}
                    (Some(e), Some(f)) => {
                        assert_eq!(e.class, f.class);
                        if idx.self_adjoint[e.class] {
                            assert_eq!(e.dagger, f.dagger);
                        } else {
                            assert_ne!(e.dagger, f.dagger);
                        }
                    }
                    _ => panic!("null pattern is not symmetric"),
                }
            }
        }
        assert_eq!(idx.entry(0, 0).unwrap().class, idx.identity_class());
    }

    #[test]
    fn classes_tie_equivalent_entries() {
        let idx = MomentIndex::build(&scen(), 2).unwrap();
        let a = idx.class_of(&Word::empty(), &w("1|1;1")).unwrap();
        let b = idx.class_of(&w("1|1"), &w("1|1;1")).unwrap();
        assert_eq!(a, b);
        let s = idx.class_of(&w("1|1"), &w("1|2")).unwrap();
        assert!(idx.scalar[s.class]);
    }

    #[test]
    fn null_entries_for_orthogonal_outcomes() {
        let s = ScenarioSpec::new(1, 3, 1, 1, 2).unwrap();
        let idx = MomentIndex::build(&s, 1).unwrap();
        assert!(idx.class_of(&w("1|1"), &w("2|1")).is_none());
        assert_eq!(idx.n_null_entries(), 2);
    }

    #[test]
    fn data_links_follow_word_length() {
        let s = ScenarioSpec::new(2, 2, 2, 2, 2).unwrap();
        let idx1 = MomentIndex::build(&s, 1).unwrap();
        assert!(data_links(&idx1).iter().all(|l| l.omega.len() + usize::from(l.y.is_some()) <= 1));
        let idx3 = MomentIndex::build(&s, 3).unwrap();
        let full = data_links(&idx3).iter().filter(|l| l.omega.len() == 2 && l.y.is_some()).count();
        assert_eq!(full, 4 * 2);
    }

    #[test]
    fn zero_identity_fails() {
        let idx = MomentIndex::build(&scen(), 1).unwrap();
        let cons = structural_constraints(&idx);
        let blocks = vec![linalg::zeros(2); idx.n_classes()];
        let m = MomentMatrix::new(idx, blocks).unwrap();
        let rep = m.validate(&cons, 1e-8);
        assert!((rep.residual("identity_entry").unwrap() - 1.0).abs() < 1e-15);
    }
}
