//! Potential theory of Brownian motion plus a weighted symmetric stable process,
//! killed on leaving a domain: closed-form bounds, analytic references, and
//! Monte-Carlo estimators.

pub mod error;
pub mod geometry;
pub mod green_bounds;
pub mod levy_model;
pub mod mc_engine;
pub mod sampler;
pub mod special_fn;
pub mod verify_harness;

pub use error::{Error, Result};
