//! Simulation engines for sizing and operating off-grid, renewable-powered
//! heterogeneous cellular networks.
//!
//! The crate is organised around the life of one scenario:
//!
//! * [`power`] — load-dependent base-station electrical load models.
//! * [`renewables`] — solar PV, biomass generator, battery bank and
//!   reliability arithmetic.
//! * [`dispatch`] — the hourly energy balance per site plus inter-site
//!   excess-energy sharing over resistive lines.
//! * [`econ`] — life-cycle cost (NPC/TAC/CRF/CoE) and pollutant accounting.
//! * [`sizing`] — exhaustive grid search for the least-NPC component mix.
//! * [`radio`] — seeded Monte-Carlo downlink SINR / throughput / energy
//!   efficiency evaluation for a two-tier layout.
//! * [`sleep`] — event-driven UE power-saving state machines (triangular
//!   DRX for NRT traffic, eDRX+PSM for NB-IoT) over M/G/1 traffic.
//! * [`scenario`] — the TOML scenario schema with embedded defaults.
//!
//! All engines are deterministic: every stochastic path is driven by an
//! explicitly configured seed and no wall-clock entropy is used anywhere.

pub mod dispatch;
pub mod econ;
pub mod power;
pub mod profile;
pub mod radio;
pub mod renewables;
pub mod scenario;
pub mod sizing;
pub mod sleep;
pub mod units;

use thiserror::Error;

/// Hours simulated in one year-long run.
pub const HOURS_PER_YEAR: usize = 8760;

/// Error type shared by all engine operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the mathematical domain of the operation
    /// (e.g. a degenerate loss chain or a zero divisor).
    #[error("domain error: {0}")]
    Domain(String),
    /// A value is outside its admissible range (e.g. a load fraction
    /// outside `[0, 1]`).
    #[error("range error: {0}")]
    Range(String),
    /// A structurally invalid input (negative energy, inconsistent series
    /// lengths, unstable traffic, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A link references a site that is not part of the run.
    #[error("topology error: {0}")]
    Topology(String),
}

pub type Result<T> = std::result::Result<T, Error>;
