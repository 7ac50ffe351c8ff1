use serde::{Deserialize, Serialize};

/// One named residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
}

/// Worst residual per invariant family; passes iff every residual is at most
/// `tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(tol: f64) -> Self {
        ValidationReport { tol, checks: Vec::new() }
    }

    /// Record a residual; repeated names keep the worst value.
    pub fn record(&mut self, name: &str, residual: f64) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual.max(0.0) };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.residual = c.residual.max(r),
            None => self.checks.push(Check { name: name.to_string(), residual: r }),
        }
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.residual)
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.residual <= self.tol)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.residual > self.tol).collect()
    }

    pub fn merge(&mut self, other: &ValidationReport) {
        for c in &other.checks {
            self.record(&c.name, c.residual);
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let mark = if c.residual <= self.tol { "ok  " } else { "FAIL" };
            writeln!(f, "{mark} {:<28} {:.3e}", c.name, c.residual)?;
        }
        Ok(())
    }
}
