//! Refinement of approximate solutions of conic programs.
//!
//! A conic program `min c^T x s.t. Ax + s = b, s in K` and its dual are
//! embedded in a homogeneous self-dual system. A candidate point of that
//! system is scored by its normalized residual, and refined by
//! Levenberg-Marquardt steps computed matrix-free with truncated LSQR.

pub mod cones;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod lsqr;
pub mod problems;
pub mod refine;

pub use error::{Error, Result};
