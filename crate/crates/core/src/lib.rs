//! Semiclassical phase-space laboratory on a periodic one-dimensional box.
//!
//! The crate provides Weyl/Wigner/Wick quantization on a lattice where
//! `hbar` is slaved to the resolution, Schatten and quantum Sobolev norms,
//! Hartree and Vlasov-Poisson solvers, and the inequality probes that
//! measure semiclassical convergence rates.

pub mod error;
pub mod spectral;
pub mod grid;
pub mod field;
pub mod operator;
pub mod profile;
pub mod quantize;
pub mod calculus;
pub mod dynamics;
pub mod estimates;
pub mod config;
pub mod io;

pub use error::{Error, Result};
pub use field::{Parity, PhaseField};
pub use config::SimConfig;
pub use grid::PhaseGrid;
pub use operator::DensityOperator;
pub use profile::{sample_field, Profile};
