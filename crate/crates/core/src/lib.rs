//! Bloch oscillations of one particle and of an interacting boson pair.
//!
//! Two bosons hopping on a tilted 1D lattice are simulated as a single walker on
//! an `N×N` lattice with defects along its diagonals, the picture realized by a
//! square array of coupled waveguides. The crate builds the generators
//! ([`model`]), evolves states exactly ([`propagator`]), reduces trajectories to
//! diagnostics ([`observables`]), maps waveguide geometry onto model rates
//! ([`photonics`]) and provides independent oracles ([`reference`]). Scenario
//! configs, presets and file output live in [`scenario`], [`output`] and
//! [`render`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod observables;
pub mod output;
pub mod photonics;
pub mod propagator;
pub mod reference;
pub mod render;
pub mod scenario;

pub use error::{Error, Result};
