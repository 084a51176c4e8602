//! Vortex densities of rapidly rotating two-dimensional condensates in the Thomas–Fermi regime.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the double-precision instantiation used by the CLI.

pub mod error;
pub mod field2d;
pub mod gpflow;
pub mod grid;
pub mod lattice;
pub mod io;
pub mod mustar;
pub mod renorm;
pub mod roots;
pub mod scalar;
pub mod tfcore;

pub use error::{Result, VortexError};
pub use scalar::Real;

pub type TfModel64 = tfcore::TfModel<f64>;
pub type TrapParams64 = tfcore::TrapParams<f64>;
pub type CostProfile64 = tfcore::CostProfile<f64>;
pub type RadialGrid64 = grid::RadialGrid<f64>;
pub type VortexDensity64 = mustar::VortexDensity<f64>;
pub type RadialMeasure64 = renorm::RadialMeasure<f64>;
pub type PotentialH64 = renorm::PotentialH<f64>;
pub type RenormReport64 = renorm::RenormReport<f64>;
pub type VortexLattice64 = lattice::VortexLattice<f64>;
pub type TrialMeasure64 = lattice::TrialMeasure<f64>;
pub type Grid2D64 = field2d::Grid2D<f64>;
pub type ScalarField2D64 = field2d::ScalarField2D<f64>;
pub type DiscDomain64 = field2d::DiscDomain<f64>;
pub type RadialProfileG64 = gpflow::RadialProfileG<f64>;
pub type GpState64 = gpflow::GpState<f64>;
pub type VorticityResult64 = gpflow::VorticityResult<f64>;
