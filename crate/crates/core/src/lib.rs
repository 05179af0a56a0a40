//! Finsler structures on holomorphic Lie algebroids.
//!
//! Everything is built from exact symbolic expressions ([`expr`]) and only
//! evaluated at the end, so nested operators keep full double precision.
//! Frame indices are 0-based throughout the API.

pub mod algebroid;
pub mod calculus;
pub mod connection;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod forms;
pub mod quadrature;
pub mod report;
pub mod sample;
pub mod suite;

pub use error::{Error, Result};
