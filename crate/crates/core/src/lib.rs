//! Conformal and affine moduli of doubly connected planar domains, and
//! explicit harmonic diffeomorphisms between such domains.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`] and [`canonical`]: the Grötzsch modulus function and closed-form
//!   moduli of annuli, Grötzsch, Teichmüller and double Teichmüller rings.
//! - [`geometry`]: polygonal domain model, affine maps and the planar predicates
//!   (width, directional projections, separation and diameter).
//! - [`condenser`]: numerical modulus of an arbitrary polygonal ring through the
//!   capacity of a discrete Dirichlet problem.
//! - [`affine_opt`]: affine modulus by search over the shear family, attainability
//!   and invariance criteria, and the harmonic-map obstruction bound.
//! - [`harmonic`]: annulus Dirichlet maps, radial and power-shear maps and the
//!   map verification suite.
//! - [`sc`]: the Schwarz–Christoffel shear construction for double Teichmüller
//!   targets.
//!
//! Special-function code is generic over [`Real`]; domain and grid code works in
//! `f64` through the aliases below.

pub mod affine_opt;
pub mod canonical;
pub mod condenser;
pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod quadrature;
pub mod scalar;
pub mod sc;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

/// Points and complex values used throughout the domain and map code.
pub type Point = num_complex::Complex64;
/// Conformal modulus in natural-log units.
pub type Modulus = f64;

pub use canonical::{CanonicalRing, ModulusEstimate, ModulusMethod};
pub use geometry::{AffineMap, BoundaryComponent, DoublyConnectedDomain, Ray, ShearNormalForm, UnboundedComponent};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
