//! Regression of molecular atomization energies from planar geometries.
//!
//! The pipeline rasterizes an approximate electron density for each
//! molecule, extracts isometry-invariant feature dictionaries (Fourier
//! modulus, Morlet wavelet, second-order scattering), and fits a sparse
//! linear model by greedy orthogonal least squares with cross-validated
//! model order. A random-sorted Coulomb-matrix kernel-ridge baseline is
//! included for comparison.
//!
//! The numeric core is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); concrete `f64` aliases are exported at the crate root.

pub mod cache;
pub mod config;
pub mod coulomb;
pub mod data;
pub mod density;
pub mod dict;
pub mod element;
pub mod error;
pub mod ols;
pub mod pipeline;
pub mod scalar;
pub mod signal;
pub mod synth;

pub use data::{Dataset, FoldAssignment, MoleculeState, PlanarMolecule};
pub use element::Element;
pub use scalar::Real;

/// Default `f64` instantiations of the generic core types.
pub type DensityGrid64 = density::DensityGrid<f64>;
pub type ProfileSet64 = density::ProfileSet<f64>;
