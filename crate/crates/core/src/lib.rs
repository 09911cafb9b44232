//! Cavity laser cooling of nuclear magnons.
//!
//! [`magnonics`] turns material and cavity inputs into the effective
//! parameters of a two-mode model, [`liouvillian`] builds and solves its
//! master equation, and [`protocols`] runs the cooling experiments on top.

pub mod cli;
pub mod error;
pub mod hilbert;
pub mod liouvillian;
pub mod magnonics;
pub mod protocols;
pub mod units;

pub use error::{Error, Result};
