//! Semidefinite hierarchy for assemblages in generalised EPR scenarios.

pub mod assemblage;
pub mod error;
pub mod functional;
pub mod generators;
pub mod instrumental;
pub mod io;
pub mod linalg;
pub mod moment;
pub mod oracle;
pub mod quantum;
pub mod reductions;
pub mod report;
pub mod scenario;
pub mod sdp;
pub mod words;

pub use assemblage::Assemblage;
pub use error::{Error, Result};
pub use functional::SteeringFunctional;
pub use instrumental::InstrumentalAssemblage;
pub use moment::{MomentIndex, MomentMatrix};
pub use quantum::QuantumRealization;
pub use report::ValidationReport;
pub use scenario::ScenarioSpec;
pub use words::{canonicalize, Canon, Letter, Word, WordSet};
