//! Distributed kernel interpolation on the unit sphere.
//!
//! The crate splits into point geometry ([`sphere_geom`]), spherical basis
//! functions ([`kernels`]), spherical harmonics and quadrature checks
//! ([`harmonics`]), single-machine interpolation ([`interpolation`]), data
//! division ([`partition`]), the distributed estimator ([`dki`]) and the
//! numerical experiment drivers ([`experiments`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dki;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod interpolation;
pub mod kernels;
pub mod partition;
pub mod sphere_geom;

pub use error::{Error, Result};
