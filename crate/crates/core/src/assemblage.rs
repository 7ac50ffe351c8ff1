use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::report::ValidationReport;
use crate::scenario::ScenarioSpec;

/// Default absolute tolerance for validation.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Blocks `σ_{a⃗|x⃗ y}` for every outcome tuple, input tuple and Bob input,
/// stored in [`ScenarioSpec::block_index`] order. Outcome `0` is stored like
/// any other outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    pub scenario: ScenarioSpec,
    pub blocks: Vec<CMat>,
}

impl Assemblage {
    pub fn new(scenario: ScenarioSpec, blocks: Vec<CMat>) -> Result<Self> {
        scenario.check()?;
        if blocks.len() != scenario.n_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks, got {}",
                scenario.n_blocks(),
                blocks.len()
            )));
        }
        let d = scenario.bob_dim;
        if let Some(b) = blocks.iter().find(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!(
                "block of shape {:?}, expected {d}x{d}",
                b.shape()
            )));
        }
        Ok(Assemblage { scenario, blocks })
    }

    /// Build from a closure over labels `(a⃗, x⃗, y)`.
    pub fn from_fn(
        scenario: ScenarioSpec,
        mut f: impl FnMut(&[usize], &[usize], usize) -> CMat,
    ) -> Result<Self> {
        let blocks = (0..scenario.n_blocks())
            .map(|i| {
                let (a, x, y) = scenario.block_labels(i);
                f(&a, &x, y)
            })
            .collect();
        Self::new(scenario, blocks)
    }

    pub fn block(&self, a: &[usize], x: &[usize], y: usize) -> &CMat {
        &self.blocks[self.scenario.block_index(a, x, y)]
    }

    pub fn dim(&self) -> usize {
        self.scenario.bob_dim
    }

    /// Marginal over the parties outside `omega`, with those parties' inputs
    /// set to `0`. `omega` lists parties in increasing order; `a_omega` and
    /// `x_omega` align with it.
    pub fn marginal(&self, omega: &[usize], a_omega: &[usize], x_omega: &[usize], y: usize) -> CMat {
        let rest = vec![0; self.scenario.n_alices];
        self.marginal_at(omega, a_omega, x_omega, y, &rest)
    }

    /// Marginal with explicit inputs `other_inputs[k]` for parties `k ∉ omega`
    /// (entries for parties in `omega` are ignored).
    pub fn marginal_at(
        &self,
        omega: &[usize],
        a_omega: &[usize],
        x_omega: &[usize],
        y: usize,
        other_inputs: &[usize],
    ) -> CMat {
        let s = &self.scenario;
        let n = s.n_alices;
        let free: Vec<usize> = (0..n).filter(|k| !omega.contains(k)).collect();
        let mut x = other_inputs.to_vec();
        let mut a = vec![0; n];
        for (i, &k) in omega.iter().enumerate() {
            x[k] = x_omega[i];
            a[k] = a_omega[i];
        }
        let mut out = linalg::zeros(s.bob_dim);
        for combo in ScenarioSpec::tuples(s.n_outcomes, free.len()) {
            for (i, &k) in free.iter().enumerate() {
                a[k] = combo[i];
            }
            out += self.block(&a, &x, y);
        }
        out
    }

    /// Bob's reduced state `σ_y`.
    pub fn bob_marginal(&self, y: usize) -> CMat {
        self.marginal(&[], &[], &[], y)
    }

    /// `p(a⃗|x⃗) = Tr σ_{a⃗|x⃗ y}` at Bob input `y`, indexed `[x⃗][a⃗]`.
    pub fn correlations_at(&self, y: usize) -> Vec<Vec<f64>> {
        let s = &self.scenario;
        s.input_tuples()
            .iter()
            .map(|x| {
                s.outcome_tuples()
                    .iter()
                    .map(|a| self.block(a, x, y).trace().re)
                    .collect()
            })
            .collect()
    }

    /// Correlation table at the first Bob input.
    pub fn correlations(&self) -> Vec<Vec<f64>> {
        self.correlations_at(0)
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let mut rep = ValidationReport::new(tol);
        for b in &self.blocks {
            rep.record("hermitian", linalg::hermiticity_residual(b));
            rep.record("psd", -linalg::min_eigenvalue(b));
        }
        rep.record("alice_no_signalling", self.alice_signalling());
        rep.record("bob_no_signalling", self.bob_signalling());
        for x in s.input_tuples() {
            for y in 0..s.n_bob_inputs {
                let total: f64 = s
                    .outcome_tuples()
                    .iter()
                    .map(|a| self.block(a, &x, y).trace().re)
                    .sum();
                rep.record("normalization", (total - 1.0).abs());
            }
        }
        rep
    }

    /// Worst change of a one-party-summed block under a change of that
    /// party's input.
    fn alice_signalling(&self) -> f64 {
        let s = &self.scenario;
        let n = s.n_alices;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for x in s.input_tuples() {
                if x[k] == 0 {
                    continue;
                }
                let mut x0 = x.clone();
                x0[k] = 0;
                for a in s.outcome_tuples() {
                    if a[k] != 0 {
                        continue;
                    }
                    for y in 0..s.n_bob_inputs {
                        let mut diff = linalg::zeros(s.bob_dim);
                        let mut ak = a.clone();
                        for out in 0..s.n_outcomes {
                            ak[k] = out;
                            diff += self.block(&ak, &x, y);
                            diff -= self.block(&ak, &x0, y);
                        }
                        worst = worst.max(linalg::max_abs(&diff));
                    }
                }
            }
        }
        worst
    }

    fn bob_signalling(&self) -> f64 {
        let s = &self.scenario;
        let mut worst: f64 = 0.0;
        for x in s.input_tuples() {
            for a in s.outcome_tuples() {
                let t0 = self.block(&a, &x, 0).trace();
                for y in 1..s.n_bob_inputs {
                    worst = worst.max((self.block(&a, &x, y).trace() - t0).norm());
                }
            }
        }
        worst
    }

    /// Largest entrywise difference to another assemblage on the same
    /// scenario.
    pub fn max_diff(&self, other: &Assemblage) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(p, q)| linalg::max_abs_diff(p, q))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn product_assemblage() -> Assemblage {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let rho = CMat::from_row_slice(2, 2, &[c64(0.6, 0.0), c64(0.1, 0.1), c64(0.1, -0.1), c64(0.4, 0.0)]);
        Assemblage::from_fn(s, |a, x, _| {
            let p = if x[0] == 0 { [0.3, 0.7][a[0]] } else { 0.5 };
            rho.scale(p)
        })
        .unwrap()
    }

    #[test]
    fn product_assemblage_is_valid() {
        let asm = product_assemblage();
        let rep = asm.validate(1e-12);
        assert!(rep.pass(), "{rep}");
        assert!((asm.correlations()[0][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn perturbation_breaks_bob_no_signalling() {
        let mut asm = product_assemblage();
        let i = asm.scenario.block_index(&[0], &[0], 1);
        asm.blocks[i][(0, 0)] += c64(0.1, 0.0);
        let rep = asm.validate(1e-8);
        assert!(!rep.pass());
        assert!((rep.residual("bob_no_signalling").unwrap() - 0.1).abs() < 1e-12);
        assert!((rep.residual("normalization").unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn full_marginal_is_block() {
        let asm = product_assemblage();
        let m = asm.marginal(&[0], &[1], &[1], 0);
        assert!(linalg::max_abs_diff(&m, asm.block(&[1], &[1], 0)) < 1e-15);
    }

    #[test]
    fn rejects_wrong_block_count() {
        let s = ScenarioSpec::new(1, 2, 2, 1, 2).unwrap();
        assert!(Assemblage::new(s, vec![linalg::identity(2)]).is_err());
    }
}
