//! Traveling waves for the forced mean curvature flow of periodic graphs.
//!
//! The crate computes the speed and profile of traveling waves two ways:
//! by running the graph evolution to long times ([`flow`]), and by
//! minimising a convex one-homogeneous energy and bisecting its value
//! function in the speed ([`variational`]). A shooting solver for the 1D
//! profile ODE ([`shooting`]) serves as an independent check in the
//! classical regime, and [`conditions`] evaluates the hypotheses on the
//! forcing under which waves are known to exist.
//!
//! Everything is generic over the scalar type through [`Real`]; the `*64`
//! aliases below fix it to `f64`, which is what the command-line harness uses.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod error;
pub mod flow;
pub mod forcing;
pub mod grid;
pub mod real;
pub mod shooting;
pub mod variational;

pub use error::{Error, Result};
pub use real::Real;

pub type ScalarField64 = grid::ScalarField<f64>;
pub type VectorField64 = grid::VectorField<f64>;
pub type Forcing64 = forcing::Forcing<f64>;
pub type ScalarField32 = grid::ScalarField<f32>;
pub type Forcing32 = forcing::Forcing<f32>;
