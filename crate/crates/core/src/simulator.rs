//! Deterministic trace replay of a training job.
//!
//! Both runners advance the job period by period. Within a period the GPU
//! draws the chosen limit's profiled avg_power at its profiled throughput;
//! carbon is integrated exactly against the trace steps (never an
//! average-power-times-average-intensity product), and a job finishing
//! mid-step is charged pro-rata for the fraction it used.

use serde::{Deserialize, Serialize};

use crate::forecast::{
    build_features, fit_linear, fit_svr, forecast_horizon, step_of_day, ForecastError,
    ForecastModel, SvrHyper,
};
use crate::optimizer::{select_power_limit, OptimizerConfig, OptimizerError, PeriodDecision};
use crate::profile::{PowerProfile, ProfileEntry, ProfileError};
use crate::trace::{CarbonTrace, TraceError};
use crate::{JOULES_PER_KWH, SECONDS_PER_DAY};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("total_samples must be > 0")]
    EmptyJob,
    #[error("job start {start} not aligned to trace steps (trace start {trace_start}, interval {interval_s})")]
    MisalignedStart {
        start: i64,
        trace_start: i64,
        interval_s: i64,
    },
    #[error("job start {start} outside trace [{trace_start}, {trace_end})")]
    StartOutsideTrace {
        start: i64,
        trace_start: i64,
        trace_end: i64,
    },
    #[error("fit window of {fit_hours} h needs trace back to {fit_start}, but the trace starts at {trace_start}")]
    MissingFitWindow {
        fit_hours: u32,
        fit_start: i64,
        trace_start: i64,
    },
    #[error("trace exhausted: need coverage until {needed_until:.3} s but the trace ends at {trace_end} s ({remaining_samples} samples unfinished)")]
    TraceExhausted {
        needed_until: f64,
        trace_end: i64,
        remaining_samples: f64,
    },
    #[error("profiling of {limits} limits needs {needed_s} s of trace before the job start")]
    MissingProfilingWindow { limits: usize, needed_s: i64 },
    #[error("reports disagree: {0}")]
    MismatchedReports(String),
    #[error(transparent)]
    Config(#[from] OptimizerError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A fixed amount of training work starting at a trace-step boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingJob {
    pub total_samples: u64,
    pub start_time: i64,
}

/// Which policy produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    CarbonAware,
    Baseline,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::CarbonAware => "carbon-aware",
            RunMode::Baseline => "baseline",
        }
    }
}

/// Identity of the trace a report was produced against, for compare checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFingerprint {
    pub start_time: i64,
    pub interval_s: i64,
    pub len: usize,
}

impl TraceFingerprint {
    pub fn of(trace: &CarbonTrace) -> Self {
        Self {
            start_time: trace.start_time(),
            interval_s: trace.interval_s(),
            len: trace.len(),
        }
    }
}

/// Forecaster driving the carbon-aware run.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecasterSpec {
    Linear,
    Svr(SvrHyper),
    /// Feeds true future trace values instead of a fitted model. No fit
    /// window is required. Exists for dominance/efficiency analysis; a real
    /// deployment cannot run this.
    Oracle,
}

impl ForecasterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ForecasterSpec::Linear => "linear",
            ForecasterSpec::Svr(_) => "svr",
            ForecasterSpec::Oracle => "oracle",
        }
    }
}

/// Knobs for [`run_carbon_aware`] beyond the optimizer config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwareOptions {
    /// Hours of trace immediately before the job start used to fit the
    /// forecaster (ignored in oracle mode).
    pub fit_hours: u32,
    /// Charge one trace step per profiled limit, immediately before the job
    /// start, for the profiling sweep.
    pub count_profiling: bool,
}

impl Default for AwareOptions {
    fn default() -> Self {
        Self {
            fit_hours: 24,
            count_profiling: false,
        }
    }
}

/// One control period's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub decision: PeriodDecision,
    /// Time-weighted mean of the true intensity over the portion used.
    pub actual_mean_ci: f64,
    pub avg_power_w: f64,
    pub duration_s: f64,
    pub samples_done: f64,
    pub energy_j: f64,
    pub carbon_g: f64,
}

/// Cost of the pre-job profiling sweep, when counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilingCost {
    pub time_s: f64,
    pub energy_j: f64,
    pub carbon_g: f64,
}

/// Full accounting of one simulated run. Totals include `profiling` when
/// present; the periods alone otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: RunMode,
    pub job: TrainingJob,
    pub trace: TraceFingerprint,
    /// Forecaster name for carbon-aware runs.
    pub forecaster: Option<String>,
    pub config: Option<OptimizerConfig>,
    pub total_time_s: f64,
    pub total_energy_j: f64,
    pub total_carbon_g: f64,
    pub profiling: Option<ProfilingCost>,
    pub periods: Vec<PeriodRecord>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Parses a report back from [`SimReport::to_json`].
pub fn parse_report(text: &str) -> Result<SimReport, SimError> {
    serde_json::from_str(text).map_err(|e| SimError::MismatchedReports(e.to_string()))
}

/// Relative carbon/energy savings and time slowdown of `aware` vs `baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub carbon_reduction_pct: f64,
    pub time_increase_pct: f64,
    pub energy_reduction_pct: f64,
}

impl ComparisonSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

fn validate_job(job: &TrainingJob, trace: &CarbonTrace) -> Result<(), SimError> {
    if job.total_samples == 0 {
        return Err(SimError::EmptyJob);
    }
    if job.start_time < trace.start_time() || job.start_time >= trace.end_time() {
        return Err(SimError::StartOutsideTrace {
            start: job.start_time,
            trace_start: trace.start_time(),
            trace_end: trace.end_time(),
        });
    }
    if (job.start_time - trace.start_time()) % trace.interval_s() != 0 {
        return Err(SimError::MisalignedStart {
            start: job.start_time,
            trace_start: trace.start_time(),
            interval_s: trace.interval_s(),
        });
    }
    Ok(())
}

fn check_period(period_s: i64, interval_s: i64) -> Result<(), SimError> {
    if period_s <= 0 || period_s % interval_s != 0 {
        return Err(SimError::Config(OptimizerError::PeriodNotMultiple {
            period_s,
            interval_s,
        }));
    }
    Ok(())
}

/// Stepwise integral of `power * ci * dt` over `[start, start + duration)`,
/// in grams, plus the time-weighted mean intensity of that span.
/// The caller guarantees the span lies inside the trace.
fn integrate_carbon(trace: &CarbonTrace, power_w: f64, start: i64, duration: f64) -> (f64, f64) {
    if duration <= 0.0 {
        return (0.0, 0.0);
    }
    let end = start as f64 + duration;
    let interval = trace.interval_s();
    let mut k = trace
        .step_index(start)
        .expect("span start inside trace by construction");
    let mut ci_seconds = 0.0;
    loop {
        let step_start = trace.timestamp(k);
        let step_end = step_start + interval;
        let overlap = end.min(step_end as f64) - (start as f64).max(step_start as f64);
        if overlap > 0.0 {
            ci_seconds += trace.values()[k] * overlap;
        }
        if step_end as f64 >= end || k + 1 >= trace.len() {
            break;
        }
        k += 1;
    }
    (power_w * ci_seconds / JOULES_PER_KWH, ci_seconds / duration)
}

/// Period-by-period engine shared by both runners. `decide` supplies the
/// decision and operating point for each period start.
fn replay(
    job: &TrainingJob,
    trace: &CarbonTrace,
    period_s: i64,
    mut decide: impl FnMut(i64, f64) -> Result<(PeriodDecision, ProfileEntry), SimError>,
) -> Result<Vec<PeriodRecord>, SimError> {
    let mut periods = Vec::new();
    let mut remaining = job.total_samples as f64;
    let mut period_start = job.start_time;
    while remaining > 0.0 {
        if period_start >= trace.end_time() {
            return Err(SimError::TraceExhausted {
                needed_until: period_start as f64,
                trace_end: trace.end_time(),
                remaining_samples: remaining,
            });
        }
        let (decision, entry) = decide(period_start, remaining)?;
        let full = period_s as f64;
        let time_to_finish = remaining / entry.throughput_sps;
        let (duration, after) = if time_to_finish <= full {
            (time_to_finish, 0.0)
        } else {
            // the recorded samples are computed from the remainder so the
            // per-period values telescope exactly to total_samples
            (full, remaining - entry.throughput_sps * full)
        };
        let samples_done = remaining - after;
        let end = period_start as f64 + duration;
        if end > trace.end_time() as f64 {
            return Err(SimError::TraceExhausted {
                needed_until: end,
                trace_end: trace.end_time(),
                remaining_samples: remaining,
            });
        }
        let (carbon_g, actual_mean_ci) =
            integrate_carbon(trace, entry.avg_power_w, period_start, duration);
        periods.push(PeriodRecord {
            decision,
            actual_mean_ci,
            avg_power_w: entry.avg_power_w,
            duration_s: duration,
            samples_done,
            energy_j: entry.avg_power_w * duration,
            carbon_g,
        });
        remaining = after;
        period_start += period_s;
    }
    Ok(periods)
}

fn totals(periods: &[PeriodRecord]) -> (f64, f64, f64) {
    let mut t = 0.0;
    let mut e = 0.0;
    let mut c = 0.0;
    for p in periods {
        t += p.duration_s;
        e += p.energy_j;
        c += p.carbon_g;
    }
    (t, e, c)
}

/// Replays the job at the profile's maximum limit on a fixed period grid.
///
/// The grid does not change the physics (the limit is constant); it makes
/// the report directly comparable, period for period, with a carbon-aware
/// run over the same job.
pub fn run_baseline(
    job: &TrainingJob,
    trace: &CarbonTrace,
    profile: &PowerProfile,
    period_s: i64,
) -> Result<SimReport, SimError> {
    validate_job(job, trace)?;
    check_period(period_s, trace.interval_s())?;
    let entry = profile.entry(profile.max_limit())?.clone();
    let periods = replay(job, trace, period_s, |period_start, _| {
        Ok((
            PeriodDecision {
                period_start,
                forecast_ci: None,
                chosen_limit_w: entry.limit_w,
                limit_costs: Vec::new(),
            },
            entry.clone(),
        ))
    })?;
    let (total_time_s, total_energy_j, total_carbon_g) = totals(&periods);
    Ok(SimReport {
        mode: RunMode::Baseline,
        job: *job,
        trace: TraceFingerprint::of(trace),
        forecaster: None,
        config: None,
        total_time_s,
        total_energy_j,
        total_carbon_g,
        profiling: None,
        periods,
    })
}

enum Forecaster {
    Fitted(Box<ForecastModel>),
    Oracle,
}

impl Forecaster {
    /// Forecast intensity for the period starting at `period_start`: the
    /// mean of the recursive multi-step forecast over the period's steps
    /// (oracle: the mean of the true step values).
    fn period_ci(
        &self,
        trace: &CarbonTrace,
        period_start: i64,
        period_s: i64,
    ) -> Result<f64, SimError> {
        let interval = trace.interval_s();
        let steps = (period_s / interval) as usize;
        match self {
            Forecaster::Oracle => {
                let first = trace
                    .step_index(period_start)
                    .expect("period start inside trace by construction");
                let last = (first + steps).min(trace.len());
                let window = &trace.values()[first..last];
                Ok(window.iter().sum::<f64>() / window.len() as f64)
            }
            Forecaster::Fitted(model) => {
                let first = trace
                    .step_index(period_start)
                    .expect("period start inside trace by construction");
                assert!(first >= 1, "fit window guarantees an observed lag step");
                let prev = trace.values()[first - 1];
                let t0 = step_of_day(period_start, interval);
                let horizon = forecast_horizon(model, t0, prev, steps);
                Ok(horizon.iter().sum::<f64>() / horizon.len() as f64)
            }
        }
    }
}

/// Fits the forecaster on the pre-job window, then replays the job picking
/// the cost-minimizing power limit at every period boundary.
pub fn run_carbon_aware(
    job: &TrainingJob,
    trace: &CarbonTrace,
    profile: &PowerProfile,
    spec: &ForecasterSpec,
    cfg: &OptimizerConfig,
    opts: &AwareOptions,
) -> Result<SimReport, SimError> {
    validate_job(job, trace)?;
    cfg.validate_for(profile, trace.interval_s())?;
    let interval = trace.interval_s();

    let forecaster = match spec {
        ForecasterSpec::Oracle => Forecaster::Oracle,
        kind => {
            let fit_start = job.start_time - i64::from(opts.fit_hours) * 3600;
            if opts.fit_hours == 0 || fit_start < trace.start_time() {
                return Err(SimError::MissingFitWindow {
                    fit_hours: opts.fit_hours,
                    fit_start,
                    trace_start: trace.start_time(),
                });
            }
            let fit_trace = trace.slice(fit_start, job.start_time)?;
            let steps_per_day = if SECONDS_PER_DAY % interval == 0 {
                (SECONDS_PER_DAY / interval) as u32
            } else {
                0 // build_features rejects it with the precise error
            };
            let (rows, targets) = build_features(&fit_trace, steps_per_day)?;
            let model = match kind {
                ForecasterSpec::Linear => fit_linear(&rows, &targets, steps_per_day)?,
                ForecasterSpec::Svr(hyper) => fit_svr(&rows, &targets, hyper, steps_per_day)?,
                ForecasterSpec::Oracle => unreachable!(),
            };
            Forecaster::Fitted(Box::new(model))
        }
    };

    let periods = replay(job, trace, cfg.period_s, |period_start, _| {
        let ci = forecaster.period_ci(trace, period_start, cfg.period_s)?;
        let decision = select_power_limit(profile, ci, cfg, period_start);
        let entry = profile.entry(decision.chosen_limit_w)?.clone();
        Ok((decision, entry))
    })?;

    let profiling = if opts.count_profiling {
        Some(profiling_cost(job, trace, profile)?)
    } else {
        None
    };

    let (mut total_time_s, mut total_energy_j, mut total_carbon_g) = totals(&periods);
    if let Some(p) = &profiling {
        total_time_s += p.time_s;
        total_energy_j += p.energy_j;
        total_carbon_g += p.carbon_g;
    }
    Ok(SimReport {
        mode: RunMode::CarbonAware,
        job: *job,
        trace: TraceFingerprint::of(trace),
        forecaster: Some(spec.name().to_string()),
        config: Some(*cfg),
        total_time_s,
        total_energy_j,
        total_carbon_g,
        profiling,
        periods,
    })
}

/// Charges one trace step per profiled limit (ascending), ending right at
/// the job start: the sweep the controller would run before training.
fn profiling_cost(
    job: &TrainingJob,
    trace: &CarbonTrace,
    profile: &PowerProfile,
) -> Result<ProfilingCost, SimError> {
    let interval = trace.interval_s();
    let n = profile.entries().len();
    let sweep_start = job.start_time - n as i64 * interval;
    if sweep_start < trace.start_time() {
        return Err(SimError::MissingProfilingWindow {
            limits: n,
            needed_s: n as i64 * interval,
        });
    }
    let mut cost = ProfilingCost {
        time_s: 0.0,
        energy_j: 0.0,
        carbon_g: 0.0,
    };
    for (i, entry) in profile.entries().iter().enumerate() {
        let step_start = sweep_start + i as i64 * interval;
        let ci = trace.intensity_at(step_start)?;
        let dt = interval as f64;
        cost.time_s += dt;
        cost.energy_j += entry.avg_power_w * dt;
        cost.carbon_g += entry.avg_power_w * dt * ci / JOULES_PER_KWH;
    }
    Ok(cost)
}

fn delta_pct(baseline: f64, other: f64) -> f64 {
    if baseline == other {
        0.0
    } else {
        100.0 * (baseline - other) / baseline
    }
}

/// Percentage deltas of an aware run against its baseline. Both reports
/// must describe the same job and trace.
pub fn compare(aware: &SimReport, baseline: &SimReport) -> Result<ComparisonSummary, SimError> {
    if aware.job != baseline.job {
        return Err(SimError::MismatchedReports(format!(
            "jobs differ: {:?} vs {:?}",
            aware.job, baseline.job
        )));
    }
    if aware.trace != baseline.trace {
        return Err(SimError::MismatchedReports(format!(
            "traces differ: {:?} vs {:?}",
            aware.trace, baseline.trace
        )));
    }
    Ok(ComparisonSummary {
        carbon_reduction_pct: delta_pct(baseline.total_carbon_g, aware.total_carbon_g),
        time_increase_pct: -delta_pct(baseline.total_time_s, aware.total_time_s),
        energy_reduction_pct: delta_pct(baseline.total_energy_j, aware.total_energy_j),
    })
}

/// Renders a report as the timeline CSV:
/// `period_start,forecast_ci,actual_mean_ci,chosen_limit_w,avg_power_w,samples_done,energy_j,carbon_g`.
/// Baseline rows leave `forecast_ci` empty.
pub fn emit_timeline(report: &SimReport) -> String {
    let mut out = String::from(
        "period_start,forecast_ci,actual_mean_ci,chosen_limit_w,avg_power_w,samples_done,energy_j,carbon_g\n",
    );
    for p in &report.periods {
        let forecast = p
            .decision
            .forecast_ci
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.decision.period_start,
            forecast,
            p.actual_mean_ci,
            p.decision.chosen_limit_w,
            p.avg_power_w,
            p.samples_done,
            p.energy_j,
            p.carbon_g
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileEntry;

    fn golden_profile() -> PowerProfile {
        PowerProfile::new(
            "a40",
            vec![
                ProfileEntry {
                    limit_w: 200,
                    avg_power_w: 190.0,
                    throughput_sps: 700.0,
                },
                ProfileEntry {
                    limit_w: 300,
                    avg_power_w: 295.0,
                    throughput_sps: 850.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn baseline_constant_rate_arithmetic() {
        let trace = CarbonTrace::new(0, 1800, vec![500.0]).unwrap();
        let job = TrainingJob {
            total_samples: 8500,
            start_time: 0,
        };
        let report = run_baseline(&job, &trace, &golden_profile(), 1800).unwrap();
        assert_eq!(report.mode, RunMode::Baseline);
        assert_eq!(report.periods.len(), 1);
        assert_eq!(report.total_time_s, 10.0);
        assert_eq!(report.total_energy_j, 2950.0);
        assert_eq!(report.total_carbon_g, 2950.0 * 500.0 / JOULES_PER_KWH);
        assert_eq!(report.periods[0].decision.chosen_limit_w, 300);
        assert_eq!(report.periods[0].decision.forecast_ci, None);
        assert_eq!(report.periods[0].samples_done, 8500.0);
    }

    #[test]
    fn baseline_integrates_stepwise() {
        let trace = CarbonTrace::new(0, 1800, vec![400.0, 800.0]).unwrap();
        // spans both steps equally: 3600 s at 850 samples/s
        let job = TrainingJob {
            total_samples: 850 * 3600,
            start_time: 0,
        };
        let report = run_baseline(&job, &trace, &golden_profile(), 1800).unwrap();
        let e = report.total_energy_j;
        assert_eq!(e, 295.0 * 3600.0);
        let want = 0.5 * e * 400.0 / JOULES_PER_KWH + 0.5 * e * 800.0 / JOULES_PER_KWH;
        assert!((report.total_carbon_g - want).abs() < 1e-9);
        assert_eq!(report.periods.len(), 2);
        assert_eq!(report.periods[0].actual_mean_ci, 400.0);
        assert_eq!(report.periods[1].actual_mean_ci, 800.0);
    }

    #[test]
    fn baseline_reports_trace_exhaustion() {
        let trace = CarbonTrace::new(0, 1800, vec![500.0]).unwrap();
        let job = TrainingJob {
            total_samples: 850 * 3600,
            start_time: 0,
        };
        let err = run_baseline(&job, &trace, &golden_profile(), 1800).unwrap_err();
        match err {
            SimError::TraceExhausted {
                trace_end,
                remaining_samples,
                ..
            } => {
                assert_eq!(trace_end, 1800);
                assert!(remaining_samples > 0.0);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn golden_two_period_scenario() {
        // intensity drops from 600 to 50 g/kWh across the two steps; with
        // eta=0.9 the high period runs capped at 200 W, the cheap one at 300 W
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let profile = golden_profile();
        let job = TrainingJob {
            total_samples: 2_025_000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let report = run_carbon_aware(
            &job,
            &trace,
            &profile,
            &ForecasterSpec::Oracle,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap();

        assert_eq!(report.periods.len(), 2);
        let p1 = &report.periods[0];
        assert_eq!(p1.decision.chosen_limit_w, 200);
        assert_eq!(p1.decision.forecast_ci, Some(600.0));
        assert_eq!(p1.samples_done, 1_260_000.0);
        assert_eq!(p1.energy_j, 342_000.0);
        assert_eq!(p1.carbon_g, 57.0);
        let p2 = &report.periods[1];
        assert_eq!(p2.decision.chosen_limit_w, 300);
        assert_eq!(p2.decision.forecast_ci, Some(50.0));
        assert_eq!(p2.samples_done, 765_000.0);
        assert_eq!(p2.duration_s, 900.0);
        assert_eq!(p2.energy_j, 265_500.0);
        assert_eq!(p2.carbon_g, 3.6875);

        assert_eq!(report.total_time_s, 2700.0);
        assert_eq!(report.total_energy_j, 607_500.0);
        assert_eq!(report.total_carbon_g, 60.6875);

        let baseline = run_baseline(&job, &trace, &profile, 1800).unwrap();
        assert!((baseline.total_time_s - 2382.3529411764707).abs() < 1e-9);
        assert!((baseline.total_energy_j - 702_794.1176470588).abs() < 1e-6);
        assert!((baseline.total_carbon_g - 90.88602941176471).abs() < 1e-9);

        let summary = compare(&report, &baseline).unwrap();
        assert!((summary.carbon_reduction_pct - 33.22681121313863).abs() < 1e-9);
        assert!((summary.time_increase_pct - 13.333333333333329).abs() < 1e-9);
        assert!((summary.energy_reduction_pct - 13.559322033898301).abs() < 1e-9);

        // identical reports compare to zero deltas
        let zero = compare(&baseline, &baseline).unwrap();
        assert_eq!(zero.carbon_reduction_pct, 0.0);
        assert_eq!(zero.time_increase_pct, 0.0);
        assert_eq!(zero.energy_reduction_pct, 0.0);
    }

    #[test]
    fn single_period_job_records_one_decision() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let job = TrainingJob {
            total_samples: 7000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let report = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Oracle,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap();
        assert_eq!(report.periods.len(), 1);
        assert_eq!(report.periods[0].decision.forecast_ci, Some(600.0));
        assert_eq!(report.periods[0].samples_done, 7000.0);
        assert_eq!(report.total_time_s, 10.0);
    }

    #[test]
    fn timeline_matches_golden_rows() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let job = TrainingJob {
            total_samples: 2_025_000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let report = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Oracle,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap();
        let csv = emit_timeline(&report);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "period_start,forecast_ci,actual_mean_ci,chosen_limit_w,avg_power_w,samples_done,energy_j,carbon_g"
        );
        assert_eq!(lines[1], "0,600,600,200,190,1260000,342000,57");
        assert_eq!(lines[2], "1800,50,50,300,295,765000,265500,3.6875");

        let baseline = run_baseline(&job, &trace, &golden_profile(), 1800).unwrap();
        let bcsv = emit_timeline(&baseline);
        for line in bcsv.trim_end().lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[1], "");
            assert_eq!(fields[3], "300");
        }
    }

    #[test]
    fn compare_rejects_mismatched_runs() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let other_trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0, 70.0]).unwrap();
        let job = TrainingJob {
            total_samples: 7000,
            start_time: 0,
        };
        let a = run_baseline(&job, &trace, &golden_profile(), 1800).unwrap();
        let b = run_baseline(&job, &other_trace, &golden_profile(), 1800).unwrap();
        assert!(matches!(
            compare(&a, &b),
            Err(SimError::MismatchedReports(_))
        ));
        let c = run_baseline(
            &TrainingJob {
                total_samples: 7001,
                start_time: 0,
            },
            &trace,
            &golden_profile(),
            1800,
        )
        .unwrap();
        assert!(matches!(
            compare(&a, &c),
            Err(SimError::MismatchedReports(_))
        ));
    }

    #[test]
    fn job_validation_errors() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let profile = golden_profile();
        let bad_align = TrainingJob {
            total_samples: 10,
            start_time: 900,
        };
        assert!(matches!(
            run_baseline(&bad_align, &trace, &profile, 1800),
            Err(SimError::MisalignedStart { .. })
        ));
        let outside = TrainingJob {
            total_samples: 10,
            start_time: 3600,
        };
        assert!(matches!(
            run_baseline(&outside, &trace, &profile, 1800),
            Err(SimError::StartOutsideTrace { .. })
        ));
        let empty = TrainingJob {
            total_samples: 0,
            start_time: 0,
        };
        assert!(matches!(
            run_baseline(&empty, &trace, &profile, 1800),
            Err(SimError::EmptyJob)
        ));
        assert!(matches!(
            run_baseline(
                &TrainingJob {
                    total_samples: 10,
                    start_time: 0
                },
                &trace,
                &profile,
                2700
            ),
            Err(SimError::Config(OptimizerError::PeriodNotMultiple { .. }))
        ));
    }

    #[test]
    fn model_mode_requires_fit_window() {
        let trace = CarbonTrace::new(0, 1800, vec![500.0; 50]).unwrap();
        let job = TrainingJob {
            total_samples: 7000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.5, 300.0, 750.0, 1800).unwrap();
        let err = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Linear,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::MissingFitWindow { .. }));
    }

    #[test]
    fn model_mode_runs_after_fit_window() {
        let day = (SECONDS_PER_DAY / 1800) as usize;
        let mut values = vec![500.0; day];
        values.extend(vec![500.0; 4]);
        let trace = CarbonTrace::new(0, 1800, values).unwrap();
        let job = TrainingJob {
            total_samples: 3_600_000,
            start_time: SECONDS_PER_DAY,
        };
        let cfg = OptimizerConfig::new(0.5, 300.0, 750.0, 1800).unwrap();
        let report = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Linear,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap();
        assert_eq!(report.forecaster.as_deref(), Some("linear"));
        // constant history forecasts ~500 everywhere
        for p in &report.periods {
            let f = p.decision.forecast_ci.unwrap();
            assert!((f - 500.0).abs() < 1e-6, "forecast {f}");
        }
        let sum: f64 = report.periods.iter().map(|p| p.samples_done).sum();
        assert_eq!(sum, 3_600_000.0);
    }

    #[test]
    fn profiling_cost_is_charged_before_start() {
        let mut values = vec![100.0; 48];
        values.extend([600.0, 50.0]);
        let trace = CarbonTrace::new(0, 1800, values).unwrap();
        let job = TrainingJob {
            total_samples: 2_025_000,
            start_time: 48 * 1800,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let opts = AwareOptions {
            count_profiling: true,
            ..AwareOptions::default()
        };
        let report = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Oracle,
            &cfg,
            &opts,
        )
        .unwrap();
        let p = report.profiling.expect("profiling should be counted");
        // two limits, one 1800 s step each at ci=100
        assert_eq!(p.time_s, 3600.0);
        assert_eq!(p.energy_j, (190.0 + 295.0) * 1800.0);
        let want_c = (190.0 + 295.0) * 1800.0 * 100.0 / JOULES_PER_KWH;
        assert!((p.carbon_g - want_c).abs() < 1e-12);
        // totals include the sweep
        let (t, e, c) = totals(&report.periods);
        assert_eq!(report.total_time_s, t + p.time_s);
        assert_eq!(report.total_energy_j, e + p.energy_j);
        assert_eq!(report.total_carbon_g, c + p.carbon_g);
    }

    #[test]
    fn report_json_round_trips() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let job = TrainingJob {
            total_samples: 2_025_000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let report = run_carbon_aware(
            &job,
            &trace,
            &golden_profile(),
            &ForecasterSpec::Oracle,
            &cfg,
            &AwareOptions::default(),
        )
        .unwrap();
        let back = parse_report(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn determinism_bit_identical_reports() {
        let trace = CarbonTrace::new(0, 1800, vec![600.0, 50.0]).unwrap();
        let job = TrainingJob {
            total_samples: 2_025_000,
            start_time: 0,
        };
        let cfg = OptimizerConfig::new(0.9, 300.0, 750.0, 1800).unwrap();
        let run = || {
            run_carbon_aware(
                &job,
                &trace,
                &golden_profile(),
                &ForecasterSpec::Oracle,
                &cfg,
                &AwareOptions::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
