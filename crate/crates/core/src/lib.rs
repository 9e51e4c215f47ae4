//! Two-photon interference at lossy beamsplitters.
//!
//! [`splitter`] models the beamsplitter (HOM dip, output state, MZI phase),
//! [`tomo`] reconstructs the two-photon polarization state from nine
//! coincidence counts, [`entangle`] scores it, and [`pipeline`] chains the
//! three with synthetic shot noise.

pub mod cli;
pub mod entangle;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod pipeline;
pub mod splitter;
pub mod tomo;

pub use error::{Error, Result};
