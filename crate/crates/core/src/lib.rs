//! Geometric-control toolkit for landmark configurations in R^d.
//!
//! Two vector fields, the constant field `d_1` and a homogeneous cubic field,
//! generate by iterated Lie brackets every polynomial vector field, so their
//! flows can steer any configuration of distinct landmarks to any other
//! (on the line: any other with the same ordering). This crate provides
//!
//! * exact polynomial vector-field algebra and Lie brackets ([`polyvec`]),
//! * the holomorphic picture used in the planar case ([`complexfield`]),
//! * landmark configurations and lifted evaluation matrices ([`landmark`]),
//! * bracket-generation certificates and constructive bracket ladders ([`bracketgen`]),
//! * flows of polynomial fields and control schedules ([`flow`]),
//! * a shooting planner that realizes a schedule between two configurations ([`planner`]).
//!
//! Everything symbolic is generic over [`Scalar`]; the aliases below fix the
//! scalar for the usual exact and floating uses.

pub mod bracketgen;
pub mod complexfield;
pub mod error;
pub mod flow;
pub mod identities;
pub mod io;
pub mod landmark;
pub mod planner;
pub mod polyvec;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Arbitrary-precision rational coefficients.
pub type Rational = num_rational::BigRational;

pub type RationalPolynomial = polyvec::Polynomial<Rational>;
pub type RationalField = polyvec::PolyVectorField<Rational>;
pub type FloatField = polyvec::PolyVectorField<f64>;
pub type GaussianField = complexfield::ComplexPolyField<Rational>;
pub type ExactConfig = landmark::LandmarkConfig<Rational>;
pub type FloatConfig = landmark::LandmarkConfig<f64>;
pub type ExactCertificate = bracketgen::RankCertificate<Rational>;
