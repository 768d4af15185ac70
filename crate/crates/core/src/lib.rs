//! Calculus on intrinsic graphs in Carnot groups.

pub mod area;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod fields;
pub mod free_lift;
pub mod group;
pub mod ode;
pub mod regularity;
pub mod sampling;
pub mod splitting;

pub use error::{Error, Result};
