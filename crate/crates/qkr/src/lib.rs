//! Simulation and analysis toolkit for the quantum kicked molecular rotor:
//! an ensemble of linear molecules driven by trains of ultrashort laser
//! kicks.
//!
//! The crate covers the full desk-scale experiment: the rotor basis and its
//! cos²θ couplings ([`rotor`]), unitary propagation through δ-kicks and
//! finite-duration pulses ([`propagation`]), the tight-binding picture and
//! quantum-resonance maps ([`lattice`]), pulse-train protocol generation
//! ([`pulse`]), thermal-ensemble averaging ([`ensemble`]) and line-shape
//! fitting of the resulting angular-momentum distributions ([`analysis`]).
//!
//! All internal quantities are dimensionless: times in units of the revival
//! time, energies in units of hcB.  See [`units`] for the conversions.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod propagation;
pub mod pulse;
pub mod rotor;
pub mod units;

#[cfg(feature = "test-oracles")]
pub mod oracle;

pub use error::{Error, Result};
