//! Numerical potential theory on disks and annuli.
//!
//! The crate computes Riesz charges of (δ-)subharmonic functions,
//! logarithmic, Green and Jensen potentials, circle / disk / smoothing
//! averages, and uses them to audit whether a zero sequence can be the zero
//! set of a holomorphic function `f` with `sup |f| exp(-M) < ∞`.
//!
//! Two independent routes are exposed for that question:
//!
//! * the balayage route ([`balayage`]): compare `Σ v(z_k)` with `∫ v dν_M`
//!   over a generated family of Jensen potentials `v`;
//! * the constructive route ([`weighted`]): build a product with the
//!   prescribed zeros and test its growth against the weight.
//!
//! [`weighted::classify_zero_sequence`] runs both and reports whether they
//! agree.

pub mod averaging;
pub mod balayage;
pub mod domain;
mod error;
pub mod field;
pub mod measures;
pub mod poisson_jensen;
pub mod potentials;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod weighted;

pub use error::{Error, Result};
pub use field::{FieldRef, ScalarField};

pub use num_complex::Complex64;
