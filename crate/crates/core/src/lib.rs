//! Robust chance-constrained group-sparse beamforming for edge inference.
//!
//! Channel uncertainty regions are learned from samples, probabilistic QoS
//! constraints are replaced by S-procedure LMIs over a lifted beamforming
//! matrix, and total network power is minimized with a rank-penalized
//! reweighted scheme that turns off (AP, task) pairs.

pub mod algorithms;
pub mod channel;
pub mod error;
pub mod harness;
pub mod reform;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
