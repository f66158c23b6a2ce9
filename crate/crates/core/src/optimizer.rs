//! Carbon/time cost model and per-period power-limit selection.
//!
//! The objective blends operational carbon against training time. For a run
//! that takes `TTA` seconds at average power `AvgPower` under average
//! intensity `AvgCI`, the carbon cost is
//!
//! ```text
//! CTA = TTA * AvgPower * AvgCI / 3.6e6        (grams of CO2)
//! ```
//!
//! and the blended objective expresses the time term in the same units by
//! pricing each second at the worst case `MaxPower * MaxCI`:
//!
//! ```text
//! Cost = TTA * (eta * AvgPower * AvgCI + (1 - eta) * MaxPower * MaxCI) / 3.6e6
//! ```
//!
//! `eta = 1` optimizes carbon alone, `eta = 0` time alone. Substituting
//! `TTA = samples / Throughput(p)` makes the per-sample cost of running a
//! period at limit `p` under intensity `ci`:
//!
//! ```text
//! cost(p) = (eta * AvgPower(p) * ci + (1 - eta) * MaxPower * MaxCI)
//!           / (3.6e6 * Throughput(p))
//! ```
//!
//! which [`select_power_limit`] minimizes over the profiled limits.

use serde::{Deserialize, Serialize};

use crate::profile::{PowerProfile, ProfileEntry, ProfileError};
use crate::JOULES_PER_KWH;

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("eta must be in [0, 1], got {0}")]
    BadEta(f64),
    #[error("max_power_w must be finite and > 0, got {0}")]
    BadMaxPower(f64),
    #[error("max_carbon_intensity must be finite and > 0, got {0}")]
    BadMaxCi(f64),
    #[error("period_s must be > 0, got {0}")]
    BadPeriod(i64),
    #[error("period_s {period_s} must be a positive multiple of the trace interval {interval_s}")]
    PeriodNotMultiple { period_s: i64, interval_s: i64 },
    #[error("profiled limit {limit} W exceeds configured max_power_w {max_power_w}")]
    LimitAboveMaxPower { limit: u32, max_power_w: f64 },
}

/// Weights and normalizers for the blended cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Carbon weight in [0, 1]; 1 - eta weights time.
    pub eta: f64,
    /// Worst-case power for the time term, in watts.
    pub max_power_w: f64,
    /// Worst-case carbon intensity for the time term, in g/kWh.
    pub max_carbon_intensity: f64,
    /// Control-period length in seconds.
    pub period_s: i64,
}

impl OptimizerConfig {
    pub fn new(
        eta: f64,
        max_power_w: f64,
        max_carbon_intensity: f64,
        period_s: i64,
    ) -> Result<Self, OptimizerError> {
        if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
            return Err(OptimizerError::BadEta(eta));
        }
        if !max_power_w.is_finite() || max_power_w <= 0.0 {
            return Err(OptimizerError::BadMaxPower(max_power_w));
        }
        if !max_carbon_intensity.is_finite() || max_carbon_intensity <= 0.0 {
            return Err(OptimizerError::BadMaxCi(max_carbon_intensity));
        }
        if period_s <= 0 {
            return Err(OptimizerError::BadPeriod(period_s));
        }
        Ok(Self {
            eta,
            max_power_w,
            max_carbon_intensity,
            period_s,
        })
    }

    /// Checks this config against a profile and trace interval: every
    /// profiled limit must fit under `max_power_w`, and the period must be
    /// a positive multiple of the interval.
    pub fn validate_for(
        &self,
        profile: &PowerProfile,
        interval_s: i64,
    ) -> Result<(), OptimizerError> {
        for limit in profile.limits() {
            if f64::from(limit) > self.max_power_w {
                return Err(OptimizerError::LimitAboveMaxPower {
                    limit,
                    max_power_w: self.max_power_w,
                });
            }
        }
        if interval_s <= 0 || self.period_s % interval_s != 0 {
            return Err(OptimizerError::PeriodNotMultiple {
                period_s: self.period_s,
                interval_s,
            });
        }
        Ok(())
    }
}

/// Carbon emitted, in grams, by `tta_s` seconds at `avg_power_w` watts under
/// `avg_ci` g/kWh.
pub fn cta(tta_s: f64, avg_power_w: f64, avg_ci: f64) -> f64 {
    tta_s * avg_power_w * avg_ci / JOULES_PER_KWH
}

/// Blended carbon/time objective in gram-equivalents.
pub fn total_cost(tta_s: f64, avg_power_w: f64, avg_ci: f64, cfg: &OptimizerConfig) -> f64 {
    tta_s
        * (cfg.eta * avg_power_w * avg_ci
            + (1.0 - cfg.eta) * cfg.max_power_w * cfg.max_carbon_intensity)
        / JOULES_PER_KWH
}

fn entry_cost(entry: &ProfileEntry, ci: f64, cfg: &OptimizerConfig) -> f64 {
    (cfg.eta * entry.avg_power_w * ci
        + (1.0 - cfg.eta) * cfg.max_power_w * cfg.max_carbon_intensity)
        / (JOULES_PER_KWH * entry.throughput_sps)
}

/// Per-sample blended cost of running at `limit_w` under intensity `ci`.
pub fn period_cost(
    profile: &PowerProfile,
    limit_w: u32,
    ci: f64,
    cfg: &OptimizerConfig,
) -> Result<f64, ProfileError> {
    Ok(entry_cost(profile.entry(limit_w)?, ci, cfg))
}

/// Cost of one candidate limit, kept for auditability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCost {
    pub limit_w: u32,
    pub cost_g_per_sample: f64,
}

/// One period's choice: the forecast it was based on, the limit picked, and
/// the full cost vector it was picked from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDecision {
    /// Epoch second the period starts at.
    pub period_start: i64,
    /// Forecast intensity the decision used; absent for baseline runs.
    pub forecast_ci: Option<f64>,
    /// Selected power limit in watts.
    pub chosen_limit_w: u32,
    /// Per-sample cost of every candidate, in profile (ascending limit)
    /// order; empty for baseline runs.
    pub limit_costs: Vec<LimitCost>,
}

/// Picks the cost-minimizing limit for one period; ties go to the lowest
/// limit. The returned decision's cost vector covers every profiled limit.
pub fn select_power_limit(
    profile: &PowerProfile,
    forecast_ci: f64,
    cfg: &OptimizerConfig,
    period_start: i64,
) -> PeriodDecision {
    let mut best: Option<(u32, f64)> = None;
    let mut limit_costs = Vec::with_capacity(profile.entries().len());
    for entry in profile.entries() {
        let cost = entry_cost(entry, forecast_ci, cfg);
        limit_costs.push(LimitCost {
            limit_w: entry.limit_w,
            cost_g_per_sample: cost,
        });
        match best {
            Some((_, c)) if c <= cost => {}
            _ => best = Some((entry.limit_w, cost)),
        }
    }
    let (chosen_limit_w, _) = best.expect("profile is never empty");
    PeriodDecision {
        period_start,
        forecast_ci: Some(forecast_ci),
        chosen_limit_w,
        limit_costs,
    }
}
