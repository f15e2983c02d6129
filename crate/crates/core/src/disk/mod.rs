//! Solvers for the transported problems on the unit disk.

pub mod banded;
pub mod continuation;
pub mod grid;
pub mod newton;
pub mod oracle;
pub mod problem;

pub use continuation::{continuation_at, continuation_branch, locate_fold, BranchEntry, BranchFamily, ContinuationBranch, Fold};
pub use grid::{build_grid, integrate, PolarGrid, Weight};
pub use newton::{solve_newton, solve_poisson, solve_system, DiskSolution, NewtonOptions};
pub use oracle::{radial_oracle, RadialOracle};
pub use problem::{Nonlinearity, ProblemSpec};
