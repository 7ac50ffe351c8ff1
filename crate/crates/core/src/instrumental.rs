//! Instrumental scenario: Bob's input equals Alice's outcome.
//!
//! Only one Alice is supported. An instrumental assemblage `σ_{a|x}` is read
//! as the diagonal slice `σ_{a|x, y=a}` of a Bob-with-Input assemblage with
//! `|Y| = |A|`.

use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::report::ValidationReport;
use crate::scenario::ScenarioSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentalAssemblage {
    /// Scenario of the embedding Bob-with-Input problem (`|Y| = |A|`).
    pub scenario: ScenarioSpec,
    /// `blocks[a * |X| + x]`.
    pub blocks: Vec<CMat>,
}

/// Equality `σ_{a|x,y} = block` imposed on a free Bob-with-Input assemblage.
#[derive(Clone, Debug, PartialEq)]
pub struct Pin {
    pub a: usize,
    pub x: usize,
    pub y: usize,
    pub block: CMat,
}

impl InstrumentalAssemblage {
    pub fn new(scenario: ScenarioSpec, blocks: Vec<CMat>) -> Result<Self> {
        scenario.check()?;
        if scenario.n_alices != 1 {
            return Err(invalid("instrumental assemblages are supported for one Alice only"));
        }
        let scenario = scenario.with_bob_inputs(scenario.n_outcomes);
        let d = scenario.bob_dim;
        if blocks.len() != scenario.n_outcomes * scenario.n_inputs || blocks.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("instrumental blocks do not match scenario".into()));
        }
        Ok(InstrumentalAssemblage { scenario, blocks })
    }

    /// Keep `σ_{a|x,y=a}` of a Bob-with-Input assemblage with `|Y| = |A|`.
    pub fn post_select(asm: &Assemblage) -> Result<Self> {
        let s = asm.scenario;
        if s.n_alices != 1 || s.n_bob_inputs != s.n_outcomes {
            return Err(invalid("post-selection needs one Alice and |Y| = |A|"));
        }
        let mut blocks = Vec::with_capacity(s.n_outcomes * s.n_inputs);
        for a in 0..s.n_outcomes {
            for x in 0..s.n_inputs {
                blocks.push(asm.block(&[a], &[x], a).clone());
            }
        }
        Self::new(s, blocks)
    }

    pub fn block(&self, a: usize, x: usize) -> &CMat {
        &self.blocks[a * self.scenario.n_inputs + x]
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let mut rep = ValidationReport::new(tol);
        for b in &self.blocks {
            rep.record("hermitian", linalg::hermiticity_residual(b));
            rep.record("psd", -linalg::min_eigenvalue(b));
        }
        for x in 0..s.n_inputs {
            let total: f64 = (0..s.n_outcomes).map(|a| self.block(a, x).trace().re).sum();
            rep.record("normalization", (total - 1.0).abs());
        }
        rep
    }

    /// Pins of the diagonal slices `y = a`.
    pub fn embed(&self) -> Vec<Pin> {
        let s = &self.scenario;
        let mut pins = Vec::new();
        for a in 0..s.n_outcomes {
            for x in 0..s.n_inputs {
                pins.push(Pin { a, x, y: a, block: self.block(a, x).clone() });
            }
        }
        pins
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pins_diagonal_slices() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let half = linalg::identity(2).scale(0.25);
        let ia = InstrumentalAssemblage::new(s, vec![half; 4]).unwrap();
        assert!(ia.validate(1e-12).pass());
        let pins: Vec<(usize, usize, usize)> = ia.embed().iter().map(|p| (p.a, p.x, p.y)).collect();
        assert_eq!(pins, [(0, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 1)]);
    }

    #[test]
    fn unnormalised_is_rejected_by_validation() {
        let s = ScenarioSpec::new(1, 2, 1, 2, 2).unwrap();
        let ia = InstrumentalAssemblage::new(s, vec![linalg::identity(2); 2]).unwrap();
        assert!(!ia.validate(1e-8).pass());
    }
}
