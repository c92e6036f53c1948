//! Numerical laboratory for a convection-diffusion inverse problem: a
//! Crank-Nicolson initial-boundary-value solver with partial boundary
//! (Dirichlet-to-Neumann) outputs, weighted-estimate verification harnesses,
//! geometric-optics solution construction, a limited-angle ray transform of
//! vector fields, and Fourier-based recovery of the convection and density
//! coefficients.

pub mod carleman;
pub mod error;
pub mod experiments;
pub mod field;
pub mod go;
pub mod grid;
pub mod io;
pub mod ops;
pub mod ray;
pub mod recovery;
pub mod solver;
pub mod spectral;
pub mod tol;
pub mod xray;

pub use error::{CdError, Result};
pub use field::{ScalarField, VectorField};
pub use grid::{BoundaryRegion, BoxFace, RegionKind, SpaceTimeGrid};
pub use tol::Tolerances;
