//! Empirical privacy auditing for differentially private federated learning.
//!
//! The crate simulates DP-FedSGD training over a synthetic client population,
//! crafts adversarial canary samples whose parameter gradient is orthogonal to
//! honest client updates, detects those canaries in the noisy aggregate, and
//! converts attack performance into empirical per-round and cumulative privacy
//! measures that can be compared against the theoretical RDP accounting.
//!
//! See the book under `book/` for a guided tour, and the `audit` binary for
//! the command-line interface.

pub mod accountant;
pub mod error;
pub mod model;
pub mod rng;
pub mod vecmath;

pub use error::{AuditError, Result};

#[cfg(test)]
pub(crate) mod testutil;
