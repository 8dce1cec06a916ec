//! Deterministic mass-spring cloth simulation.
//!
//! The cloth is a rectangular grid of point masses joined by structural,
//! shear and distance-two bending springs, integrated with semi-implicit
//! Euler. Three scripted scenes produce the data the models learn from:
//! a pulling exploratory action with force sensing, a partial bandage over
//! a cylindrical arm under a force action, and lifting a sphere resting on
//! the cloth under a displacement action.

mod cloth;
mod config;
mod error;
mod savgol;
mod scenes;

pub use cloth::{
    make_cloth, settle, step, ClothState, Collider, Constraint, PhysicalParams, SettleOptions,
    Sphere, Spring, SpringKind, Vec3,
};
pub use config::SimConfig;
pub use error::{Result, SimError};
pub use savgol::savgol_smooth;
pub use scenes::{
    action_grid, bandage_initial, lifting_initial, pulling_initial, run_bandage, run_lifting,
    run_pulling_ea, subsample_indices, Observation,
};
