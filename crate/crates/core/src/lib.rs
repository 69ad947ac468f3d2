//! Discrete-event simulation of few-photon interference in fiber networks.
//!
//! Photons are superpositions of Gaussian wavepacket terms spread over
//! routes; multi-photon probabilities are permanents of the overlap matrix.
//! Devices rewrite states, detectors project pools onto photon numbers, and
//! the [`engine`] drives trials in time order from a TOML netlist.

pub mod components;
pub mod detector;
pub mod engine;
pub mod error;
pub mod fock;
pub mod quantum;
pub mod sources;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Position, Result};
