//! Perfect simulation of context-dependent interacting particle systems on
//! the integer line, with a focus on nucleotide substitution models.

pub mod analytic;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod flowsim;
pub mod oracle;
pub mod rulesys;
pub mod stats;
pub mod ypr;

pub use error::{Error, Result};
