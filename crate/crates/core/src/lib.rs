//! Elliptic dielectric microcavities: billiard ray dynamics, closed and open
//! wave spectra, boundary Husimi distributions and self-energy analysis.

pub mod analysis;
pub mod geometry;
pub mod husimi;
pub mod linalg;
pub mod raydyn;
pub mod scalar;
pub mod specfun;
pub mod tracker;
pub mod wavesolver;

pub use num_complex::Complex64;

/// Ellipse in double precision.
pub type Ellipse = geometry::EllipseGeometry<f64>;
/// Birkhoff coordinate in double precision.
pub type Birkhoff = raydyn::BirkhoffCoord<f64>;
