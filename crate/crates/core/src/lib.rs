//! Mild-solution machinery for the incompressible Navier–Stokes equations on a
//! periodic box: spectral operators, Duhamel integrals, Picard iteration and
//! the critical space-time norms used to certify contraction.

pub mod duhamel;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod io;
pub mod norms;
pub mod presets;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod spectral;

pub use rustfft::num_complex::Complex64;

pub use error::{Error, Result};
pub use field::{SpaceTimeField, SpatialField};
pub use grid::{
    cell_mask, cylinder_mask, dyadic_partition, make_grid, restrict, CellKind, CylinderSpec,
    DyadicCell, Grid, IndexSet, SpaceGrid, TimeSpacing,
};
pub use norms::{NormConfig, NormReport, NormSpace, Witness};
pub use harness::{CaseId, ExperimentConfig, GridPreset, SolveConfig, SolvePreset, TrendReport};
pub use quadrature::QuadratureRule;
pub use report::{EstimateReport, GridInfo};
pub use solver::{ProblemData, SolutionTrace, SolveOptions, SpaceSelector};
pub use spectral::Symbol;
