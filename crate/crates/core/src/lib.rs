//! Numerical laboratory for matrix-product-state codes and approximate quantum
//! error detection.

pub mod aqedc;
pub mod error;
pub mod excitation;
pub mod fit;
pub mod linalg;
pub mod magnon;
pub mod mps;
pub mod noise;
pub mod par;
pub mod rng;
pub mod serial;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
