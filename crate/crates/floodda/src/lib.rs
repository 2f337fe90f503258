//! Desk-scale ensemble data assimilation for riverine flood reanalysis.
//!
//! The toolkit couples a 1D Saint-Venant forward model with zoned Strickler
//! friction to a stochastic ensemble Kalman filter that estimates friction
//! coefficients and an inflow correction factor from gauge water levels and
//! swath-altimeter node observations. A twin-experiment (OSSE) harness
//! generates synthetic observations from a known truth run so that parameter
//! recovery and reanalysis skill can be verified end to end.
//!
//! Main pieces:
//! - [`river`]: finite-volume shallow-water solver with composite
//!   channel/floodplain cross sections.
//! - [`control`]: the estimated control vector (zoned Strickler `ks` plus
//!   inflow multiplier `mu`), priors, bounds and sampling.
//! - [`obs`]: observation data model, pass plans and the operators mapping
//!   model trajectories to gauge and node observations.
//! - [`enkf`]: stochastic EnKF with perturbed observations and the
//!   assimilation cycle loop.
//! - [`osse`]: truth generation and synthetic observation synthesis
//!   (pixel cloud -> node aggregation, dark-water degradation).
//! - [`metrics`]: RMSE / CSI scoring and summary tables.
//! - [`config`] / [`experiment`]: configuration-driven experiment runner
//!   (OL / IDA / SWDA / FDA and revisit-frequency sweeps).

pub mod config;
pub mod control;
pub mod enkf;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod obs;
pub mod osse;
pub mod river;
pub mod seed;

pub use error::{Error, Result};
