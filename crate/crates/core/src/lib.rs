//! Numerical laboratory for sphere-valued harmonic maps on 3-D domains.
//!
//! The crate builds masked uniform grids over the cube, ball, and half ball,
//! evaluates discrete Dirichlet energies and their localized and normalized
//! variants, computes fractional Gagliardo seminorms of boundary traces,
//! produces approximate energy minimizers by projected heat flow, and
//! detects and classifies the point defects of the resulting fields.

pub mod domain;
pub mod energy;
pub mod error;
pub mod field;
pub mod io;
pub mod minimizer;
pub mod singularity;
pub mod trace_norms;
pub mod vec3;

pub use domain::{build_domain, BoundarySurface, DomainGrid, DomainKind};
pub use error::{Error, Result};
pub use field::{hedgehog, restrict_trace, BoundaryTrace, SphereField, VectorField};
pub use io::{load_field, save_field};

/// The energy density of a degree-one point defect, 8 pi.
pub const DEFECT_DENSITY: f64 = 8.0 * std::f64::consts::PI;
