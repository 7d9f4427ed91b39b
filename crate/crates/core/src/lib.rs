//! Recovery of signals that are simultaneously sparse in time and frequency
//! by joint l1 minimization, together with dual-certificate construction and
//! verification, the sparse + low-rank matrix extension, and a seeded
//! phase-transition harness.

pub mod certificate;
pub mod error;
pub mod harness;
pub mod jbpm;
pub mod numeric;
pub mod sensing;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
