//! Finite-stage constructions of polynomial maps with prescribed wandering
//! domains.
//!
//! The crate builds, stage by stage, polynomials that approximate an entire
//! function for which a given bounded region is an escaping or an
//! oscillating wandering domain, and certifies each stage with sampled
//! geometric checks.

// Comparisons are written as `!(x > 0.0)` where NaN must count as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod construction;
pub mod escaping;
pub mod frontend;
pub mod geometry;
pub mod oscillating;
pub mod polynomials;
pub mod verification;

pub use num_complex::Complex64;
