//! Core-radius approximation of cavitation energies for planar nonlinear
//! elasticity.
//!
//! The crate evaluates regularized energies on perforated domains, measures
//! cavities through boundary integrals of traces on small circles, minimizes a
//! radially reduced energy and builds recovery sequences. The `cavicore`
//! binary exposes the experiments as subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod cli;
pub mod deformation;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod minimize;
pub mod quadrature;
pub mod recovery;

pub use error::{Error, Result};
pub use geometry::{Mat2, Vec2};
