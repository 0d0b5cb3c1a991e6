//! Core of a spontaneous-localization quantum trajectory simulator.
//!
//! A 1-D wavefunction on a periodic grid evolves under the Schrödinger
//! equation (split-step spectral integration) and is interrupted by Gaussian
//! localization hits arriving as a Poisson process. Composite objects of `N`
//! nucleons are modelled as one collective coordinate hit at rate `N·λ`.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the thread pool live in the `grwlab` companion crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod collapse;
pub mod error;
pub mod exclusion;
pub mod experiments;
pub mod fft;
pub mod propagator;
pub mod qstate;
pub mod rates;
pub mod rng;
pub mod stats;

pub use collapse::{CollapseEvent, CollapseParams, TrajectoryRecord};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use propagator::Potential;
pub use qstate::{Grid1D, HybridState, Observables, UnitSystem, WaveFunction};
pub use rng::RngStream;

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Nucleon (proton) mass, kg.
pub const NUCLEON_MASS_KG: f64 = 1.672_621_92e-27;
/// Electron-to-nucleon mass ratio used for the electron rate.
pub const ELECTRON_MASS_MN: f64 = 1.0 / 1_836.152_673_43;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
