//! Carbon-aware control for GPU training jobs.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`trace`] / [`synth`] ingest or generate grid carbon-intensity traces
//!    (fixed-interval step functions in gCO2/kWh).
//! 2. [`forecast`] fits short-term intensity models (linear regression or
//!    epsilon-SVR on cyclical time-of-day features plus the previous value).
//! 3. [`optimizer`] + [`simulator`] pick a GPU power limit per control period
//!    by minimizing a weighted carbon/time cost, and replay a training job
//!    against a trace with exact energy/carbon/time accounting.

pub mod forecast;
pub mod optimizer;
pub mod profile;
pub mod simulator;
pub mod synth;
pub mod trace;

/// Joules in one kilowatt-hour. Every conversion from J to kWh in the crate
/// goes through this constant so the divisor is applied exactly once.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Seconds in one day; the cyclical feature period is a day.
pub const SECONDS_PER_DAY: i64 = 86_400;

pub use optimizer::{cta, period_cost, select_power_limit, total_cost, OptimizerConfig};
pub use profile::{PowerProfile, ProfileEntry};
pub use simulator::{
    compare, emit_timeline, run_baseline, run_carbon_aware, AwareOptions, ComparisonSummary,
    ForecasterSpec, SimReport, TrainingJob,
};
pub use trace::CarbonTrace;
