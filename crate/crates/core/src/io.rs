//! JSON file formats.
//!
//! Every file carries `"format": 1`. Matrices are stored as row-major
//! real and imaginary parts. Outcome, input and Bob-input labels in block
//! lists are 0-based; moment classes are keyed by their word strings
//! (see [`Word`]'s `Display`), whose inputs are 1-based.

use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::functional::SteeringFunctional;
use crate::instrumental::InstrumentalAssemblage;
use crate::linalg::{c64, CMat};
use crate::moment::{MomentIndex, MomentMatrix};
use crate::reductions::{JmrwMatrix, NpaMatrix};
use crate::scenario::ScenarioSpec;
use crate::sdp::DualCheck;
use crate::words::{Word, WordSet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        MatrixJson { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_matrix(&self, d: usize) -> Result<CMat> {
        let square = |p: &Vec<Vec<f64>>| p.len() == d && p.iter().all(|r| r.len() == d);
        if !square(&self.re) || !square(&self.im) {
            return Err(Error::DimensionMismatch(format!("matrix parts must be {d}x{d}")));
        }
        if self.re.iter().chain(&self.im).flatten().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(CMat::from_fn(d, d, |i, j| c64(self.re[i][j], self.im[i][j])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockJson {
    pub a: Vec<usize>,
    pub x: Vec<usize>,
    pub y: usize,
    #[serde(flatten)]
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblageFile {
    pub format: u32,
    pub scenario: ScenarioSpec,
    pub blocks: Vec<BlockJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalFile {
    pub format: u32,
    pub scenario: ScenarioSpec,
    pub coefficients: Vec<BlockJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentalBlockJson {
    pub a: usize,
    pub x: usize,
    #[serde(flatten)]
    pub matrix: MatrixJson,
}

/// `scenario.nBobInputs` is ignored on input and written as `|A|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentalFile {
    pub format: u32,
    pub scenario: ScenarioSpec,
    pub blocks: Vec<InstrumentalBlockJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    BobWithInput,
    Npa,
    Jmrw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassJson {
    pub word: String,
    #[serde(flatten)]
    pub matrix: MatrixJson,
}

/// One value per moment class. NPA certificates store `1 × 1` blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format: u32,
    pub flavor: Flavor,
    pub scenario: ScenarioSpec,
    pub level: usize,
    pub classes: Vec<ClassJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualMode {
    Membership,
    Instrumental,
}

/// Dual multipliers of an infeasibility claim, one symmetric matrix per
/// cone of the membership problem, with the recheck that accepted them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualFile {
    pub format: u32,
    pub mode: DualMode,
    pub scenario: ScenarioSpec,
    pub level: usize,
    pub cones: Vec<Vec<Vec<f64>>>,
    pub check: DualCheck,
}

fn check_format(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::FormatVersion { found, expected: FORMAT_VERSION });
    }
    Ok(())
}

fn blocks_json(s: &ScenarioSpec, blocks: &[CMat]) -> Vec<BlockJson> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (a, x, y) = s.block_labels(i);
            BlockJson { a, x, y, matrix: MatrixJson::from_matrix(m) }
        })
        .collect()
}

/// Blocks in [`ScenarioSpec::block_index`] order; each label once.
fn blocks_from_json(s: &ScenarioSpec, blocks: &[BlockJson]) -> Result<Vec<CMat>> {
    s.check()?;
    let mut out: Vec<Option<CMat>> = vec![None; s.n_blocks()];
    for b in blocks {
        let n = s.n_alices;
        if b.a.len() != n || b.x.len() != n {
            return Err(Error::DimensionMismatch(format!("block labels must have {n} entries")));
        }
        if b.a.iter().any(|&v| v >= s.n_outcomes) || b.x.iter().any(|&v| v >= s.n_inputs) || b.y >= s.n_bob_inputs {
            return Err(invalid(format!("block label a={:?} x={:?} y={} out of range", b.a, b.x, b.y)));
        }
        let i = s.block_index(&b.a, &b.x, b.y);
        if out[i].is_some() {
            return Err(invalid(format!("duplicate block a={:?} x={:?} y={}", b.a, b.x, b.y)));
        }
        out[i] = Some(b.matrix.to_matrix(s.bob_dim)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                let (a, x, y) = s.block_labels(i);
                invalid(format!("missing block a={a:?} x={x:?} y={y}"))
            })
        })
        .collect()
}

impl AssemblageFile {
    pub fn new(asm: &Assemblage) -> Self {
        AssemblageFile { format: FORMAT_VERSION, scenario: asm.scenario, blocks: blocks_json(&asm.scenario, &asm.blocks) }
    }

    pub fn into_assemblage(self) -> Result<Assemblage> {
        check_format(self.format)?;
        Assemblage::new(self.scenario, blocks_from_json(&self.scenario, &self.blocks)?)
    }
}

impl FunctionalFile {
    pub fn new(f: &SteeringFunctional) -> Self {
        FunctionalFile {
            format: FORMAT_VERSION,
            scenario: f.scenario,
            coefficients: blocks_json(&f.scenario, &f.coefficients),
        }
    }

    pub fn into_functional(self) -> Result<SteeringFunctional> {
        check_format(self.format)?;
        SteeringFunctional::new(self.scenario, blocks_from_json(&self.scenario, &self.coefficients)?)
    }
}

impl InstrumentalFile {
    pub fn new(ia: &InstrumentalAssemblage) -> Self {
        let s = ia.scenario;
        let mut blocks = Vec::new();
        for a in 0..s.n_outcomes {
            for x in 0..s.n_inputs {
                blocks.push(InstrumentalBlockJson { a, x, matrix: MatrixJson::from_matrix(ia.block(a, x)) });
            }
        }
        InstrumentalFile { format: FORMAT_VERSION, scenario: s, blocks }
    }

    pub fn into_instrumental(self) -> Result<InstrumentalAssemblage> {
        check_format(self.format)?;
        let s = self.scenario.with_bob_inputs(self.scenario.n_outcomes);
        s.check()?;
        let mut out: Vec<Option<CMat>> = vec![None; s.n_outcomes * s.n_inputs];
        for b in &self.blocks {
            if b.a >= s.n_outcomes || b.x >= s.n_inputs {
                return Err(invalid(format!("block label a={} x={} out of range", b.a, b.x)));
            }
            let slot = &mut out[b.a * s.n_inputs + b.x];
            if slot.is_some() {
                return Err(invalid(format!("duplicate block a={} x={}", b.a, b.x)));
            }
            *slot = Some(b.matrix.to_matrix(s.bob_dim)?);
        }
        let blocks = out
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| invalid(format!("missing block a={} x={}", i / s.n_inputs, i % s.n_inputs))))
            .collect::<Result<Vec<_>>>()?;
        InstrumentalAssemblage::new(s, blocks)
    }
}

fn classes_json(index: &MomentIndex, blocks: &[CMat]) -> Vec<ClassJson> {
    index
        .classes
        .iter()
        .zip(blocks)
        .map(|(w, m)| ClassJson { word: w.to_string(), matrix: MatrixJson::from_matrix(m) })
        .collect()
}

/// Class values keyed by word; either member of a `{u, u†}` pair is accepted.
fn class_values(index: &MomentIndex, classes: &[ClassJson], d: usize) -> Result<Vec<CMat>> {
    let mut out: Vec<Option<CMat>> = vec![None; index.n_classes()];
    for c in classes {
        let missing = || invalid(format!("word `{}` is not a level-{} class", c.word, index.level()));
        let w = Word::parse(&c.word)?;
        let u = crate::words::canonicalize(&w, index.scenario())?.word().cloned().ok_or_else(missing)?;
        let e = index.class_of_word(&u).ok_or_else(missing)?;
        if out[e.class].is_some() {
            return Err(invalid(format!("class of `{}` given twice", c.word)));
        }
        let m = c.matrix.to_matrix(d)?;
        out[e.class] = Some(if e.dagger { m.adjoint() } else { m });
    }
    out.into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| invalid(format!("missing class `{}`", index.classes[i]))))
        .collect()
}

/// A certificate of any flavor read back from a file.
#[derive(Clone, Debug)]
pub enum Certificate {
    BobWithInput(MomentMatrix),
    Npa(NpaMatrix),
    Jmrw(JmrwMatrix),
}

impl CertificateFile {
    pub fn bob_with_input(gamma: &MomentMatrix) -> Self {
        CertificateFile {
            format: FORMAT_VERSION,
            flavor: Flavor::BobWithInput,
            scenario: *gamma.index.scenario(),
            level: gamma.index.level(),
            classes: classes_json(&gamma.index, &gamma.blocks),
        }
    }

    pub fn jmrw(delta: &JmrwMatrix) -> Self {
        CertificateFile {
            flavor: Flavor::Jmrw,
            ..Self::bob_with_input(&delta.moments)
        }
    }

    pub fn npa(npa: &NpaMatrix) -> Result<Self> {
        let index = MomentIndex::from_words(npa.words.clone())?;
        let blocks = npa_class_blocks(&index, &npa.matrix);
        Ok(CertificateFile {
            format: FORMAT_VERSION,
            flavor: Flavor::Npa,
            scenario: npa.words.scenario,
            level: npa.words.level,
            classes: classes_json(&index, &blocks),
        })
    }

    pub fn into_certificate(self) -> Result<Certificate> {
        check_format(self.format)?;
        let s = self.scenario;
        Ok(match self.flavor {
            Flavor::BobWithInput => {
                let index = MomentIndex::build(&s, self.level)?;
                let blocks = class_values(&index, &self.classes, s.bob_dim)?;
                Certificate::BobWithInput(MomentMatrix::new(index, blocks)?)
            }
            Flavor::Jmrw => {
                let index = MomentIndex::build_without_bob(&s, self.level)?;
                let blocks = class_values(&index, &self.classes, s.bob_dim)?;
                Certificate::Jmrw(JmrwMatrix { moments: MomentMatrix::new(index, blocks)? })
            }
            Flavor::Npa => {
                let words = WordSet::without_bob(&s, self.level)?;
                let index = MomentIndex::from_words(words.clone())?;
                let values = class_values(&index, &self.classes, 1)?;
                let n = index.size();
                let matrix = CMat::from_fn(n, n, |i, j| match index.entry(i, j) {
                    None => c64(0.0, 0.0),
                    Some(e) if e.dagger => values[e.class][(0, 0)].conj(),
                    Some(e) => values[e.class][(0, 0)],
                });
                Certificate::Npa(NpaMatrix { words, matrix })
            }
        })
    }
}

/// One representative entry per class of a scalar matrix.
fn npa_class_blocks(index: &MomentIndex, m: &CMat) -> Vec<CMat> {
    let n = index.size();
    let mut out: Vec<Option<CMat>> = vec![None; index.n_classes()];
    for i in 0..n {
        for j in 0..n {
            if let Some(e) = index.entry(i, j) {
                if out[e.class].is_none() {
                    let z = if e.dagger { m[(i, j)].conj() } else { m[(i, j)] };
                    out[e.class] = Some(CMat::from_element(1, 1, z));
                }
            }
        }
    }
    out.into_iter().map(|b| b.expect("every class occurs in the table")).collect()
}

impl DualFile {
    pub fn new(mode: DualMode, scenario: ScenarioSpec, level: usize, dual: &[DMatrix<f64>], check: &DualCheck) -> Self {
        let cones = dual
            .iter()
            .map(|z| (0..z.nrows()).map(|i| (0..z.ncols()).map(|j| z[(i, j)]).collect()).collect())
            .collect();
        DualFile { format: FORMAT_VERSION, mode, scenario, level, cones, check: check.clone() }
    }

    pub fn matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        check_format(self.format)?;
        self.cones
            .iter()
            .map(|rows| {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch("dual cone matrices must be square".into()));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            })
            .collect()
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a certificate file, checking the flavor tag first.
pub fn read_certificate(path: &Path) -> Result<Certificate> {
    read_json::<CertificateFile>(path)?.into_certificate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random_quantum, QuantumDims};
    use crate::oracle::reference_moment_matrix;
    use crate::reductions::npa_project;

    fn quantum(s: &ScenarioSpec) -> (Assemblage, MomentMatrix) {
        let qr = gen_random_quantum(3, s, &QuantumDims::default_for(s)).unwrap();
        (qr.assemblage().unwrap(), reference_moment_matrix(&qr, 2).unwrap())
    }

    #[test]
    fn assemblage_round_trip() {
        let s = ScenarioSpec::new(2, 2, 2, 2, 2).unwrap();
        let (asm, _) = quantum(&s);
        let text = serde_json::to_string(&AssemblageFile::new(&asm)).unwrap();
        let back: AssemblageFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_assemblage().unwrap(), asm);
    }

    #[test]
    fn rejects_wrong_format_and_missing_blocks() {
        let s = ScenarioSpec::new(1, 2, 2, 1, 2).unwrap();
        let (asm, _) = quantum(&s);
        let mut f = AssemblageFile::new(&asm);
        f.format = 2;
        assert!(matches!(f.clone().into_assemblage(), Err(Error::FormatVersion { found: 2, .. })));
        f.format = 1;
        f.blocks.pop();
        assert!(f.clone().into_assemblage().is_err());
        let dup = f.blocks[0].clone();
        f.blocks.push(dup);
        assert!(f.into_assemblage().is_err());
    }

    #[test]
    fn certificate_round_trip_is_exact() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let (_, gamma) = quantum(&s);
        let text = serde_json::to_string(&CertificateFile::bob_with_input(&gamma)).unwrap();
        let back: CertificateFile = serde_json::from_str(&text).unwrap();
        let Certificate::BobWithInput(g) = back.into_certificate().unwrap() else { panic!("flavor") };
        assert_eq!(g.blocks, gamma.blocks);

        let npa = npa_project(&gamma).unwrap();
        let text = serde_json::to_string(&CertificateFile::npa(&npa).unwrap()).unwrap();
        let Certificate::Npa(m) = serde_json::from_str::<CertificateFile>(&text).unwrap().into_certificate().unwrap()
        else {
            panic!("flavor")
        };
        assert_eq!(m.matrix, npa.matrix);
    }

    #[test]
    fn class_given_by_adjoint_word() {
        let s = ScenarioSpec::new(1, 2, 2, 1, 2).unwrap();
        let (_, gamma) = quantum(&s);
        let mut f = CertificateFile::bob_with_input(&gamma);
        let k = gamma.index.self_adjoint.iter().position(|sa| !sa).unwrap();
        let w = gamma.index.classes[k].dagger();
        f.classes[k] = ClassJson { word: w.to_string(), matrix: MatrixJson::from_matrix(&gamma.blocks[k].adjoint()) };
        let Certificate::BobWithInput(g) = f.into_certificate().unwrap() else { panic!("flavor") };
        assert!(crate::linalg::max_abs_diff(&g.blocks[k], &gamma.blocks[k]) < 1e-15);
    }
}
