//! Variance-reduced estimation of the apparent conductivity of random
//! periodic assemblies of disks.
//!
//! The crate is organised around the five numerical building blocks of the
//! workflow:
//!
//! * [`microstructure`]: hard-disk Monte-Carlo generation of periodic
//!   assemblies, radius shrinking and the on-disk JSON format.
//! * [`greenfun`]: the periodic Green operator in Fourier space, the disk
//!   shape factor `2 J1(x) / x` and the slowly convergent Fourier-series
//!   influence tensors (used as a reference oracle).
//! * [`eim`]: infinite-body influence tensors, the corrected lattice sum and
//!   the equivalent-inclusion linear system (the cheap surrogate).
//! * [`fullfield`]: a spectral Lippmann–Schwinger solver of the periodic
//!   corrector problem on a pixel grid (the expensive reference).
//! * [`estimator`]: control-variate estimation of ensemble averages.
//!
//! ```
//! use eimvr::eim::eim_conductivity;
//! use eimvr::microstructure::{Disk, Microstructure};
//!
//! // One centred disk covering a quarter of the unit cell, contrast 10.
//! let radius = (0.25 / std::f64::consts::PI).sqrt();
//! let ms = Microstructure::new(1.0, vec![Disk::new([0.5, 0.5], radius)]).unwrap();
//! let sigma = eim_conductivity(&ms, 1.0, 10.0, 2).unwrap();
//! assert!((sigma.xx - 1.514_285_714_285_714).abs() < 1e-10);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eim;
pub mod estimator;
pub mod fullfield;
pub mod greenfun;
pub mod microstructure;
pub mod rng;
mod sum;
mod tensor;

pub use tensor::{Tensor2, Vec2};
