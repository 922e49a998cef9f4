//! Simulation and analysis of photon-added coherent states as approximations
//! to cubic phase states.
//!
//! The crate is organised bottom-up: [`fock`] provides the truncated Fock
//! space, [`states`] the named quantum states, [`gaussian`] the Gaussian
//! group and orbit optimizer, [`measurement`] the heterodyne/homodyne
//! simulators with photon-addition postselection, [`tomography`] maximum
//! likelihood reconstruction and [`analysis`] Wigner functions, fidelities
//! and photon statistics.

pub mod analysis;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod measurement;
pub mod states;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{C64, DensityMatrix, FockOperator, Mixture, StateVector};
