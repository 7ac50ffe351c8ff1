use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Shape of a generalised EPR scenario: `N` Alices with `|A|` outcomes and
/// `|X|` inputs each, and a Bob with `|Y|` inputs holding a `d`-dimensional
/// system.
///
/// Inside the library parties, inputs and Bob inputs are 0-based; outcome `0`
/// is the outcome omitted from the alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_alices: usize,
    pub n_outcomes: usize,
    pub n_inputs: usize,
    pub n_bob_inputs: usize,
    pub bob_dim: usize,
}

impl ScenarioSpec {
    pub fn new(
        n_alices: usize,
        n_outcomes: usize,
        n_inputs: usize,
        n_bob_inputs: usize,
        bob_dim: usize,
    ) -> Result<Self> {
        let s = ScenarioSpec { n_alices, n_outcomes, n_inputs, n_bob_inputs, bob_dim };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_alices == 0 {
            return Err(invalid("scenario needs at least one Alice"));
        }
        if self.n_outcomes < 2 {
            return Err(invalid("scenario needs at least two outcomes per input"));
        }
        if self.n_inputs == 0 || self.n_bob_inputs == 0 || self.bob_dim == 0 {
            return Err(invalid("input counts and Bob's dimension must be positive"));
        }
        Ok(())
    }

    /// Same scenario with Bob's input set replaced.
    pub fn with_bob_inputs(&self, n_bob_inputs: usize) -> Self {
        ScenarioSpec { n_bob_inputs, ..*self }
    }

    /// Number of joint outcome strings `a⃗ ∈ A^N`.
    pub fn n_outcome_tuples(&self) -> usize {
        self.n_outcomes.pow(self.n_alices as u32)
    }

    /// Number of joint input strings `x⃗ ∈ X^N`.
    pub fn n_input_tuples(&self) -> usize {
        self.n_inputs.pow(self.n_alices as u32)
    }

    pub fn n_blocks(&self) -> usize {
        self.n_outcome_tuples() * self.n_input_tuples() * self.n_bob_inputs
    }

    /// Dense index of the block `(a⃗, x⃗, y)`; party 1 is the most significant
    /// digit of each tuple.
    pub fn block_index(&self, a: &[usize], x: &[usize], y: usize) -> usize {
        let ai = tuple_index(a, self.n_outcomes);
        let xi = tuple_index(x, self.n_inputs);
        (ai * self.n_input_tuples() + xi) * self.n_bob_inputs + y
    }

    /// Inverse of [`block_index`](Self::block_index).
    pub fn block_labels(&self, idx: usize) -> (Vec<usize>, Vec<usize>, usize) {
        let y = idx % self.n_bob_inputs;
        let rest = idx / self.n_bob_inputs;
        let xi = rest % self.n_input_tuples();
        let ai = rest / self.n_input_tuples();
        (
            tuple_digits(ai, self.n_outcomes, self.n_alices),
            tuple_digits(xi, self.n_inputs, self.n_alices),
            y,
        )
    }

    /// All tuples in `{0..base}^len`, lexicographically.
    pub fn tuples(base: usize, len: usize) -> Vec<Vec<usize>> {
        let count = base.pow(len as u32);
        (0..count).map(|i| tuple_digits(i, base, len)).collect()
    }

    pub fn outcome_tuples(&self) -> Vec<Vec<usize>> {
        Self::tuples(self.n_outcomes, self.n_alices)
    }

    pub fn input_tuples(&self) -> Vec<Vec<usize>> {
        Self::tuples(self.n_inputs, self.n_alices)
    }
}

pub(crate) fn tuple_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

pub(crate) fn tuple_digits(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for k in (0..len).rev() {
        out[k] = idx % base;
        idx /= base;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_index_round_trip() {
        let s = ScenarioSpec::new(2, 3, 2, 2, 2).unwrap();
        for i in 0..s.n_blocks() {
            let (a, x, y) = s.block_labels(i);
            assert_eq!(s.block_index(&a, &x, y), i);
        }
    }

    #[test]
    fn rejects_single_outcome() {
        assert!(ScenarioSpec::new(1, 1, 2, 1, 2).is_err());
    }

    #[test]
    fn json_field_names() {
        let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
        let v = serde_json::to_value(s).unwrap();
        assert_eq!(v["nAlices"], 1);
        assert_eq!(v["bobDim"], 2);
    }
}
