//! Hard-core discs and balls moving as reflected Brownian motions with a
//! constant downward drift inside a vessel.
//!
//! The stationary law of the system is known in closed form: on the
//! configuration space it has density proportional to
//! `exp(-2 * sum_k a_k * x^k_1)`. The crate samples it exactly with a
//! Metropolis chain ([`sampler`]), integrates the pathwise dynamics with a
//! projected Euler scheme ([`dynamics`]), builds honeycomb packings and
//! estimates the lowest weighted centre of mass ([`packing`]), and turns the
//! macroscopic predictions (liquid surface, centrifuge sorting, floating and
//! sinking, inertia) into reproducible experiments ([`experiments`]).

pub mod cli;
pub mod configuration;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod packing;
pub mod sampler;

pub use configuration::{Configuration, ModelSpec};
pub use error::{Error, Result};
pub use geometry::{Ball, Vessel};
