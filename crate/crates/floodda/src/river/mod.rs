//! 1D Saint-Venant forward model with zoned Strickler friction and
//! composite channel/floodplain cross sections.
//!
//! The solver is an explicit finite-volume scheme with Rusanov fluxes,
//! MUSCL (minmod) reconstruction of water surface elevation and discharge,
//! and hydrostatic interface depths. Lake-at-rest and steady uniform flow
//! are discrete fixed points, which the tests pin down.

mod geometry;
mod solver;
mod steady;

pub use geometry::{BoundaryForcing, CrossSection, FrictionZone, RatingCurve, RiverGeometry};
pub use solver::{
    flood_extent_mask, run, run_with_budget, step, wse_at, ExtentMask, HydroState, MassBudget,
    RunOptions, SolverScratch, H_DRY,
};
pub(crate) use solver::run_effective;
pub use steady::steady_uniform_depth;

/// Gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.81;
