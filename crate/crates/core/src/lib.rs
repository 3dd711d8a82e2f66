//! Simulation and analysis toolkit for fiber Fabry-Pérot microcavities that
//! carry a thin diamond membrane.
//!
//! The crate is organised bottom-up:
//!
//! - [`optics`]: materials, layers, stacks and the mirror/gap/membrane/gap/mirror
//!   cavity assembly, plus the JSON assembly config.
//! - [`tmm`]: normal-incidence transfer-matrix solver, field profiles,
//!   resonance search, dispersion maps, effective length and the dispersion fit.
//! - [`metrics`]: Gaussian mode geometry, loss budgets, finesse and Q.
//! - [`purcell`]: Purcell factor, lifetime reduction and the lifetime-vs-length fit.
//! - [`fit`]: damped least-squares engine with the spectral and decay model zoo.
//! - [`scan`]: length-scan peak analysis, side-of-fringe length deviation and
//!   noise spectra.
//!
//! Lengths and wavelengths are in nanometres unless a name says otherwise
//! (`_um`, `_pm`).

pub mod constants;
pub mod error;
pub mod fit;
pub mod io;
pub mod metrics;
pub mod optics;
pub mod purcell;
pub mod scan;
pub mod tmm;

pub use error::{Error, Result};
