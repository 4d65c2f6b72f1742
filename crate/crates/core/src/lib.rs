//! Finite-dimensional toolkit for sequential implementations of jointly
//! measurable quantum observables.
//!
//! The crate builds universal measurement channels from minimal Naimark
//! dilations, tests whether a given channel still allows a subsequent
//! measurement to implement a target observable (through its conjugate
//! channel), and decides joint measurability numerically with an
//! alternating-projection feasibility engine, or exactly for unbiased
//! qubit pairs.

pub mod channel;
pub mod dilation;
pub mod error;
pub mod feasibility;
pub mod linalg;
pub mod povm;
pub mod universal;

pub use error::{Error, Result};
