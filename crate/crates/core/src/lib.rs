//! Cosine-distance early stopping for overparameterized models.
//!
//! Two identically configured models that differ only in their initial
//! weights are trained side by side. The cosine distance between their
//! weights falls along an L-shaped curve, and training stops at its corner.

pub mod data;
pub mod error;
pub mod models;
pub mod numerics;
pub mod objectives;
pub mod stopping;
pub mod twin;

pub use error::{Error, Result};
