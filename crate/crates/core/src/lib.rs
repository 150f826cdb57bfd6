//! Continuous photodetection of a single cavity mode with a non-ideal detector.
//!
//! Everything here works on the diagonal of the field density operator in the
//! Fock basis. Two quantum-jump models are covered:
//!
//! - [`sd_model`]: jump superoperator `λ(ηÂ + d)` with `Âρ = âρâ†`. The
//!   detector sees every photon, so the absorption rate scales with `n`.
//! - [`e_model`]: jump superoperator `λ(ηε̂ + d)` with `ε̂ρ = Ê₋ρÊ₊`. The
//!   detector only sees whether the cavity is empty.
//!
//! Both expose count distributions, factorial moments, waiting-time densities
//! and the mean cavity photon number. [`trajectories`] samples the same
//! dynamics as a classical jump process and is used as an independent oracle.
//!
//! The crate is `no_std` (it needs `alloc`). IO, parallel ensembles and the
//! command line live in the `cpm` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod e_model;
mod counting;
mod error;
pub mod fock;
mod num;
mod params;
pub mod quadrature;
pub mod sd_model;
pub mod special;
pub mod superops;
pub mod trajectories;

pub use crate::counting::default_window;
pub use crate::error::{CpmError, Result};
pub use crate::fock::{DiagonalFockState, StateKind, DEFAULT_TAIL_EPSILON};
pub use crate::params::{CountDistribution, DetectorParams, WaitingTimeCurve};
pub use crate::trajectories::{EventKind, Model, TrajectoryRecord};
