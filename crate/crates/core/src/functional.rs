use crate::assemblage::Assemblage;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::scenario::ScenarioSpec;

/// Linear functional `Σ Tr[F_{a⃗x⃗y} σ_{a⃗|x⃗y}]` with Hermitian coefficients
/// stored in block order.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringFunctional {
    pub scenario: ScenarioSpec,
    pub coefficients: Vec<CMat>,
}

impl SteeringFunctional {
    pub fn new(scenario: ScenarioSpec, coefficients: Vec<CMat>) -> Result<Self> {
        scenario.check()?;
        let d = scenario.bob_dim;
        if coefficients.len() != scenario.n_blocks() || coefficients.iter().any(|c| c.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("functional coefficients do not match scenario".into()));
        }
        if coefficients.iter().any(|c| linalg::hermiticity_residual(c) > 1e-12) {
            return Err(invalid("functional coefficients must be Hermitian"));
        }
        Ok(SteeringFunctional { scenario, coefficients })
    }

    /// Functional whose value on any normalised assemblage is 1.
    pub fn normalization(scenario: ScenarioSpec) -> Self {
        let w = 1.0 / (scenario.n_input_tuples() * scenario.n_bob_inputs) as f64;
        let c = linalg::identity(scenario.bob_dim).scale(w);
        SteeringFunctional { scenario, coefficients: vec![c; scenario.n_blocks()] }
    }

    /// Random Hermitian coefficients with unit-scale entries.
    pub fn random(seed: u64, scenario: ScenarioSpec) -> Self {
        let mut rng = crate::generators::rng(seed);
        let coefficients = (0..scenario.n_blocks())
            .map(|_| crate::generators::random_hermitian(&mut rng, scenario.bob_dim))
            .collect();
        SteeringFunctional { scenario, coefficients }
    }

    pub fn value(&self, asm: &Assemblage) -> Result<f64> {
        if asm.scenario != self.scenario {
            return Err(Error::DimensionMismatch("functional and assemblage scenarios differ".into()));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(&asm.blocks)
            .map(|(f, s)| (f * s).trace().re)
            .sum())
    }
}
