//! Minimal dense-array numeric core for training small graph networks.
//!
//! Values are row-major `f64` arrays. Differentiable computations are
//! recorded on a [`Tape`] and replayed backwards to produce gradients for
//! every trainable slot of a [`ParamStore`]. [`Adam`] consumes those
//! gradients, and [`grad_check`] compares them against central differences.

mod adam;
mod array;
pub mod checkpoint;
mod error;
mod gradcheck;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use array::Array;
pub use checkpoint::Checkpoint;
pub use error::{DiffError, Result};
pub use gradcheck::{grad_check, GradCheckOptions};
pub use params::{Gradients, ParamStore, Slot};
pub use tape::{Activation, CustomBackward, Tape, Var};
