//! Numerical toolkit for the polynomial Karma model and the FitzHugh-Nagumo
//! model of cardiac excitability.
//!
//! The crate is `no_std` compatible (it needs `alloc`) and contains only pure
//! numerics:
//!
//! - [`model`]: right-hand sides, reaction/restitution/dispersion functions and
//!   the rescaling between the 1994 and 1993 Karma formulations.
//! - [`integrate`]: adaptive Dormand-Prince integration with switching-line and
//!   section events.
//! - [`analysis`]: critical manifolds, equilibria, current thresholds, fold
//!   curves, singular orbits and slow-manifold scaling checks.
//! - [`wave`]: travelling-pulse construction by shooting in the co-moving frame.
//! - [`pde`]: method-of-lines simulation in one space dimension, wave
//!   measurements and parameter sweeps.
//! - [`blowup`]: the planar polar blow-up example.
//!
//! File formats, the command line and parallel sweeps live in the companion
//! `excitable` crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod blowup;
pub mod integrate;
pub mod model;
pub mod pde;
pub mod roots;
pub mod wave;

mod math;

pub use model::{FhnParams, Karma94Params, KarmaParams, PhaseState, Reaction};
