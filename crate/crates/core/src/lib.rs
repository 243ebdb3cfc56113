//! Quantum full adder on an Ising spin chain: pulse compiler, exact
//! state-vector simulator and perturbative quantum-map simulator.

pub mod adder;
pub mod analysis;
pub mod chain;
pub mod error;
pub mod exact;
pub mod map;
pub mod pulses;

pub use error::{Error, Result};
