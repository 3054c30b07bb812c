//! Simulation of dispersive heterodyne readout of a multilevel superconducting qudit.

pub mod error;
pub mod io;
pub mod lab;
pub mod lindblad;
pub mod model;
pub mod quantum;
pub mod sme;

pub use error::{Error, Result};
