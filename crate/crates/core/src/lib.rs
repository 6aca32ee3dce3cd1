//! Numerical laboratory for projections of fractal measures, Fourier energy
//! decay on dyadic shells, the k-plane transform, and unions of affine
//! k-planes.
//!
//! Modules:
//! - [`measures`]: discrete measures, Cantor/grid/product constructors, Frostman fits
//! - [`projections`]: `P_x`, `T_x`, plane parameters and the sliced Frostman condition
//! - [`spectral`]: nonuniform Fourier sums, shell energies, Sobolev and decay estimates
//! - [`kplane`]: the k-plane transform, mixed norms and the bound-ratio experiment
//! - [`unions`]: rasterized unions of planes, occupancy sweeps and sumsets

pub mod error;
pub mod field;
pub mod fit;
pub mod kplane;
pub mod measures;
pub mod numeric;
pub mod projections;
pub mod spectral;
pub mod unions;

pub use error::{Error, Result};
pub use field::GridField;
pub use fit::SlopeFit;
pub use measures::{AtomBudget, CantorSpec, DiscreteMeasure, FrostmanReport, ProbePolicy};
pub use projections::{PlaneParam, PlaneSet, ProjectionParam};

/// Version string embedded in every experiment output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
