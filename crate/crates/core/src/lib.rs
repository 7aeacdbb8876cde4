//! Photon blockade with weak Kerr nonlinearities, realized in a displaced
//! frame: drive tuning, Lindblad dynamics, spectral and semiclassical
//! analysis, and a noisy Fock-state generation protocol.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod protocol;
pub mod semiclassical;
pub mod spectral;

pub use error::{Error, Result};
