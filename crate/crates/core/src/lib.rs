//! Simulator and analysis toolkit for an interacting-agent stock market.
//!
//! The market couples two trader populations: fundamentalists, who trade
//! against a log fundamental value, and interacting traders, who imitate
//! each other with a randomly varying intensity. Clearing their combined
//! demand each day yields the price, return and volume series. As the
//! conformity effect strengthens, return and volume distributions move from
//! Gaussian through exponential to power-law tails; the [`tails`] module
//! classifies those regimes and [`sweep`] charts them over a grid.
//!
//! Modules:
//! - [`model`] — pure formula layer and parameter validation;
//! - [`simulate`] — the SDE integrator, series generation and an exact
//!   agent-level oracle for small populations;
//! - [`tails`] — tail-family fitting, Hill estimation, moments, ACF;
//! - [`ingest`] — user-supplied daily close/volume data;
//! - [`sweep`] — replicated parallel parameter sweeps;
//! - [`series`] — the shared on-disk series schema.

pub mod ingest;
pub mod model;
pub mod series;
pub mod simulate;
pub mod sweep;
pub mod tails;

pub use ingest::{load_daily_csv, log_returns, EmpiricalSeries, IngestError};
pub use model::{Boundary, MarketRegime, MarketState, ModelParams, ParamError, PhiNoise};
pub use simulate::{
    euler_step, run_simulation, simulate_agents, AgentEnsemble, SimError, SimulationSeries,
};
pub use sweep::{
    cell_seed, run_sweep, AnalysisConfig, CellRecord, RhoSummary, SweepError, SweepResult,
    SweepSpec,
};
pub use tails::{
    acf_abs, ccdf, classify_tail, fit_tail_family, hill_estimate, histogram, moments, HillEstimate,
    MomentSummary, RegimeLabel, TailClass, TailError, TailFamily, TailFit, TailFits, YScale,
};
