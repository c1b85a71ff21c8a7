//! Numerical laboratory for nodal sets of harmonic functions and Laplace
//! eigenfunctions on flat geometries.
//!
//! Every numerical routine is generic over the scalar type through [`Real`];
//! the `*64` aliases below fix it to `f64`, which is what the experiments use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod census;
pub mod error;
pub mod fields;
pub mod fit;
pub mod geom;
pub mod growth;
pub mod nodal;
mod optim;
pub mod quadrature;
pub mod scalar;
pub mod simplexcov;
pub mod smallness;
pub mod zoo;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Cube64 = geom::Cube<f64>;
pub type Ball64 = geom::Ball<f64>;
pub type Simplex64 = geom::Simplex<f64>;
pub type Field64 = fields::Field<f64>;
pub type FrequencyProfile64 = growth::FrequencyProfile<f64>;
pub type DoublingReport64 = growth::DoublingReport<f64>;
pub type CubeIndexReport64 = growth::CubeIndexReport<f64>;
pub type NodalEstimate64 = nodal::NodalEstimate<f64>;
pub type ScalingFit64 = nodal::ScalingFit<f64>;
pub type CensusReport64 = census::CensusReport<f64>;
pub type CoveringConstants64 = simplexcov::CoveringConstants<f64>;
pub type SmallnessReport64 = smallness::SmallnessReport<f64>;
