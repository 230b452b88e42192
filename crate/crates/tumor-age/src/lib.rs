//! Estimate how old a renal tumor is from its diameter.
//!
//! The library models per-interval growth rates (reciprocal doubling times,
//! doublings per year) with a two-sided exponential mixture, simulates volume
//! trajectories from a common starting volume, and inverts the simulated
//! size-given-age distribution into age-given-size percentiles by recording
//! the ages at which trajectories are observable at each reporting diameter
//! (scan ages within a size bucket by default, or exactly interpolated
//! threshold crossings — see [`invert::CrossingMode`]).
//!
//! The usual entry points are [`report::build_table`] for the percentile
//! table, [`report::query_age`] for an interpolated lookup at one diameter,
//! and [`report::sensitivity_sweep`] for the effect of serial correlation.

pub mod copula;
pub mod error;
pub mod geometry;
pub mod growth;
pub mod ingest;
pub mod invert;
pub mod manifest;
pub mod mixture;
pub mod report;

pub use error::{Error, Result};
pub use geometry::{diameter_to_volume, volume_to_diameter, Diameter, Volume};
pub use growth::{grow_step, simulate_ensemble, simulate_history, GrowthHistory, SimulationConfig};
pub use invert::{build_age_table, crossing_times, percentiles, AgeTable, CrossingMode, DiameterGrid};
pub use mixture::RdtMixture;
pub use report::{build_table, query_age, sensitivity_sweep, AgeQueryResult, SensitivityReport};
