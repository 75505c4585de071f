mod banded;
pub mod deficit;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod optimize;
pub mod rearrange;
pub mod shape;

pub use banded::{BandCholesky, SymBand};
pub use deficit::{DeficitBaseline, DeficitReport, DeficitSample, Family, FamilyKind, PlanEntry};
pub use eigen::{EigenPair, Operator, PotentialField, SolveOptions};
pub use error::{Error, Result};
pub use grid::{Grid, IntervalGrid, PolarGrid, RadialGrid};
pub use optimize::{AnnulusCompetitor, OptimizeOptions, OptimizerReport};
pub use rearrange::LevelSetSelection;
pub use shape::{BallContext, FourierPerturbation, ModeSolution};
