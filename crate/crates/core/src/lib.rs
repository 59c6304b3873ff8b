//! Spectral verification of the paraxial (Schrödinger) approximation to the
//! Helmholtz equation written as an evolution problem in `z`.
//!
//! Fields live in transverse Fourier space where both evolutions are
//! diagonal, so the Helmholtz solution, the multiple-scaling ansatz, and
//! their difference are all computed exactly per mode. The only
//! discretisation is the midpoint quadrature used for norms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approximation;
pub mod commands;
pub mod config;
pub mod error;
pub mod propagators;
pub mod spectral;

pub use error::{ParaxialError, Result};
