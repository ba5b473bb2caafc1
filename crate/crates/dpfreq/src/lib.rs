//! Sampling-based differentially private frequency estimation.

pub mod data;
pub mod error;
pub mod experiment;
pub mod field;
pub mod mech;
pub mod seed;
pub mod sharing;
pub mod sim;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use field::{EncodedRecord, FieldSpec};
pub use mech::{FrequencyEstimate, MechanismParams, Reporting};
