use thiserror::Error;

use crate::cloth::PhysicalParams;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("simulation diverged (dt = {dt}, stiffness = {}, bending = {})", params.stiffness, params.bending)]
    Diverged { dt: f64, params: PhysicalParams },
    #[error("settling did not converge after {steps} steps (residual {residual:.3e} N)")]
    NotConverged { steps: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, SimError>;
