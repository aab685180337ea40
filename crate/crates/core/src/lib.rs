//! Numerical laboratory for hierarchical photonic cat states.
//!
//! Two backends run side by side: an exact coherent-state algebra
//! ([`coherent`]) and a truncated Fock-space engine ([`fock`]). Every state in
//! [`catalog`] can be built in both, and the analyses in [`stats`],
//! [`metrology`], [`dynamics`] and [`circuits`] cross-check one against the other.

pub mod catalog;
pub mod circuits;
pub mod cli;
pub mod coherent;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod io;
pub mod metrology;
pub mod ops;
pub mod stats;

pub use error::{LabError, LabResult};

pub type C64 = num_complex::Complex<f64>;
