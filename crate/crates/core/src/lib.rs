//! Dirichlet fractional Laplacian on bounded domains in `R¹` and `R²`:
//! discretization as a killed jump process, low eigenpairs, expected exit
//! times, closed-form spectral bounds and Monte Carlo cross-checks.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod operator;
pub mod spectra;
mod eigen;
mod quad;

pub use constants::{BoundConstants, StableParams, Variant};
pub use error::{Error, Result};
pub use geometry::{rasterize, Ball, Domain, Grid, RasterMask, Shape};
pub use operator::{assemble, DynkinParts, ExitTimeField, KilledOperator};
pub use spectra::{eigenpairs, spectral_gap, variational_energy, EigenSolution, LevelSetReport};
