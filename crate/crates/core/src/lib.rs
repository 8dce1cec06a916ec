//! Learning cloth dynamics conditioned on a latent representation of its
//! elastic properties, distilled from an exploratory pulling action.
//!
//! * [`graph`] and [`pointcloud`]: graph states, neighbour sets,
//!   normalization and point-cloud slicing.
//! * [`model`]: adaptation, forward-dynamics, inverse and decoding networks.
//! * [`data`]: dataset generation, storage and preparation.
//! * [`train`]: losses and training loops for every model variant.
//! * [`eval`]: the experiments and their reports.
//! * [`config`]: the run configuration and its hash.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod pointcloud;
pub mod train;

pub use error::{CoreError, Result};
