//! Linear-optical simulation of single-photon pulses that keep coherence with vacuum.
//!
//! The crate covers exact Fock-space propagation through passive networks, the
//! correlation histograms of a path-unbalanced Mach-Zehnder interferometer, a
//! post-selected path/time entangled state, a heralded CNOT gate built from two
//! nonlinear-sign gates, and a time-tag generator with its analysis pipeline.

pub mod circuit;
pub mod cnot;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod hom;
pub mod optimize;
pub mod source;
pub mod timetag;

pub use error::{Error, Result};
