//! Ground states and least-energy sign-changing solutions of
//! `Δ²u = f(u)` on a rectangle, with hinged (Navier) or clamped (Dirichlet)
//! boundary conditions, computed through the dual functional
//! `Ψ(w) = ∫H(w) − ½∫wTw` where `T = (Δ²)⁻¹` and `H' = f⁻¹`.
//!
//! ```no_run
//! use biharm_dual::{BoundaryCondition, DualContext, Grid2D, Nonlinearity, SolverConfig};
//!
//! let grid = Grid2D::unit_square(33, BoundaryCondition::Navier)?;
//! let ctx = DualContext::new(grid, Nonlinearity::pure_power(4.0)?)?;
//! let report = biharm_dual::solve_ground_state(&ctx, &SolverConfig::default())?;
//! println!("Ψ = {}, residual = {:e}", report.psi, report.residual);
//! # Ok::<(), biharm_dual::Error>(())
//! ```

pub mod banded;
pub mod biharmonic;
pub mod dual;
pub mod error;
pub mod grid;
pub mod nehari;
pub mod nonlinearity;
pub mod roots;
pub mod solver;

pub use biharmonic::BiharmonicInverse;
pub use dual::{DualContext, EnergyReport};
pub use error::{Error, Result};
pub use grid::{BoundaryCondition, Field, Grid2D};
pub use nehari::{
    cross_term_inequality, fibering_jacobian, fibering_value, project_nodal, project_ray, FiberingJacobian,
    NodalProjection,
};
pub use nonlinearity::{Diagnostics, HypothesisCheck, Nonlinearity, Term};
pub use solver::{
    classify, solve_ground_state, solve_ground_state_from, solve_nodal, solve_nodal_from, Classification,
    DescentMetric, SolveReport, SolverConfig, StartSummary, TraceEntry,
};
