//! Convolutions of projection measures on convex perturbations of the
//! two-dimensional paraboloid, and bounds for the associated sharp
//! Fourier extension constants.
//!
//! The surfaces handled here are graphs `ψ(y) = |y|² + φ(y)` with `φ ≥ 0`
//! convex, plus the pure powers `Ψ(y) = |y|^p`. The central object is the
//! density of `wσ ∗ wσ`, evaluated through an implicit radial rescaling of
//! the paraboloid's ellipsoids onto the level sets of
//! `y ↦ ψ(ξ/2+y) + ψ(ξ/2−y)`.
//!
//! Module map:
//! - [`geometry`]: surfaces, the rescaling `λ`, the map `T` and `det T'`.
//! - [`convolution`]: support classification, boundary values, the angular
//!   formula for the density and an independent slab-quadrature oracle.
//! - [`purepower`]: the homogeneous profile of `|·|^{(p-2)/2} ν_p` convolutions.
//! - [`bounds`]: optimal-constant bounds and the Strichartz ratio integral.
//! - [`diagnostics`]: concentration ratios, cap interaction, comparison scans.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod convolution;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod purepower;
pub mod quadrature;
pub mod roots;
pub mod special;

pub use config::NumericConfig;
pub use error::{Error, Result};
pub use linalg::{Sym2, Vec2};
