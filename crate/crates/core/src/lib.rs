//! Geometric multigrid for anisotropic Poisson problems on graded structured
//! grids in Cartesian, cylindrical and spherical coordinates.
//!
//! The pieces, bottom-up: [`mesh`] builds nested grid hierarchies,
//! [`operator`] assembles the five-point operator on each level, [`smoother`]
//! provides the preconditioned Richardson smoothers, [`transfer`] moves
//! functions between levels, [`mgcycle`] runs V/W/F cycles and [`study`]
//! sweeps parameters and writes CSV tables. [`cli`] wires it to the command
//! line.

pub mod cli;
pub mod direct;
pub mod error;
pub mod mesh;
pub mod mgcycle;
pub mod operator;
pub mod problem;
pub mod smoother;
pub mod study;
pub mod transfer;

pub use direct::DirectSolver;
pub use error::{Error, Result};
pub use mesh::{build_hierarchy, grade_axis, CoordinateSystem, GradingSpec, GridHierarchy, LevelGrid};
pub use mgcycle::{
    adaptive_omega, cycle_schedule, fcycle_schedule, solve, CorrectionOmega, CycleEvent, CycleKind,
    CycleSpec, MultigridSolver, SolveReport, Visit,
};
pub use operator::{AnisotropySpec, GridFunction, StencilOperator};
pub use problem::Problem;
pub use smoother::{SmootherKind, SmootherSpec, SmootherState};
pub use study::{
    convergence_rate, make_start_vector, run_study, SolverConfig, StartChoice, StartVectorStrategy,
    StudyConfig, StudyResult, SweepAxis,
};
pub use transfer::Transfer;
