//! Python bindings: traces, profiles, forecasters, the optimizer, and the
//! simulator, mirroring the Rust API. Reports and evaluations cross the
//! boundary as JSON strings so Python sees exactly the file formats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use chase_core::forecast::{self, build_features, evaluate_models, ModelKind, SvrHyper};
use chase_core::optimizer::{self, OptimizerConfig};
use chase_core::profile::{parse_profile, PowerProfile, ProfileEntry};
use chase_core::simulator::{self, AwareOptions, ForecasterSpec, SimError, SimReport, TrainingJob};
use chase_core::synth::{synth_trace, SynthParams};
use chase_core::trace::{self, TraceFormat};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::TraceExhausted { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_format(format: &str) -> PyResult<TraceFormat> {
    match format {
        "csv" => Ok(TraceFormat::Csv),
        "json" => Ok(TraceFormat::Json),
        other => Err(value_err(format!("unknown format `{other}` (csv|json)"))),
    }
}

/// Uniform carbon-intensity step series.
#[pyclass(name = "CarbonTrace", skip_from_py_object)]
#[derive(Clone)]
struct PyCarbonTrace {
    inner: trace::CarbonTrace,
}

#[pymethods]
impl PyCarbonTrace {
    #[new]
    fn new(start_time: i64, interval_s: i64, values: Vec<f64>) -> PyResult<Self> {
        trace::CarbonTrace::new(start_time, interval_s, values)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Parses a trace document; format is "csv" or "json".
    #[staticmethod]
    fn parse(text: &str, format: &str) -> PyResult<Self> {
        let format = parse_format(format)?;
        trace::parse_trace(text, format)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Seeded sinusoid-plus-noise generator, phase-anchored to midnight UTC.
    #[staticmethod]
    #[pyo3(signature = (mean=550.0, amplitude=150.0, period_steps=48, noise_sigma=10.0, len=552, interval_s=1800, start_time=0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        mean: f64,
        amplitude: f64,
        period_steps: u32,
        noise_sigma: f64,
        len: usize,
        interval_s: i64,
        start_time: i64,
        seed: u64,
    ) -> PyResult<Self> {
        let params = SynthParams {
            mean,
            amplitude,
            period_steps,
            noise_sigma,
            len,
            interval_s,
            start_time,
            seed,
        };
        synth_trace(&params)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn start_time(&self) -> i64 {
        self.inner.start_time()
    }

    #[getter]
    fn interval_s(&self) -> i64 {
        self.inner.interval_s()
    }

    #[getter]
    fn end_time(&self) -> i64 {
        self.inner.end_time()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn timestamps(&self) -> Vec<i64> {
        (0..self.inner.len())
            .map(|k| self.inner.timestamp(k))
            .collect()
    }

    /// Intensity of the step containing `t`.
    fn intensity_at(&self, t: i64) -> PyResult<f64> {
        self.inner.intensity_at(t).map_err(value_err)
    }

    /// Maximum intensity over steps overlapping `[start, end)`.
    fn window_max(&self, start: i64, end: i64) -> PyResult<f64> {
        self.inner.window_max(start, end).map_err(value_err)
    }

    fn slice(&self, start: i64, end: i64) -> PyResult<Self> {
        self.inner
            .slice(start, end)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "CarbonTrace(start_time={}, interval_s={}, len={})",
            self.inner.start_time(),
            self.inner.interval_s(),
            self.inner.len()
        )
    }
}

/// Per-limit GPU operating points.
#[pyclass(name = "PowerProfile", skip_from_py_object)]
#[derive(Clone)]
struct PyPowerProfile {
    inner: PowerProfile,
}

#[pymethods]
impl PyPowerProfile {
    /// Builds a profile from `(limit_w, avg_power_w, throughput_sps)` rows.
    #[new]
    fn new(gpu: &str, entries: Vec<(u32, f64, f64)>) -> PyResult<Self> {
        let entries = entries
            .into_iter()
            .map(|(limit_w, avg_power_w, throughput_sps)| ProfileEntry {
                limit_w,
                avg_power_w,
                throughput_sps,
            })
            .collect();
        PowerProfile::new(gpu, entries)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_profile(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn gpu(&self) -> String {
        self.inner.gpu().to_string()
    }

    fn limits(&self) -> Vec<u32> {
        self.inner.limits().collect()
    }

    #[getter]
    fn max_limit(&self) -> u32 {
        self.inner.max_limit()
    }

    fn entries(&self) -> Vec<(u32, f64, f64)> {
        self.inner
            .entries()
            .iter()
            .map(|e| (e.limit_w, e.avg_power_w, e.throughput_sps))
            .collect()
    }

    /// Joules per training sample at `limit_w`.
    fn energy_per_sample(&self, limit_w: u32) -> PyResult<f64> {
        self.inner.energy_per_sample(limit_w).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "PowerProfile(gpu={:?}, limits={:?})",
            self.inner.gpu(),
            self.inner.limits().collect::<Vec<_>>()
        )
    }
}

/// Fitted one-step intensity forecaster.
#[pyclass(name = "ForecastModel")]
struct PyForecastModel {
    inner: forecast::ForecastModel,
}

#[pymethods]
impl PyForecastModel {
    /// Fits `kind` ("linear" or "svr") on a whole trace.
    #[staticmethod]
    #[pyo3(signature = (trace, kind="linear"))]
    fn fit(trace: &PyCarbonTrace, kind: &str) -> PyResult<Self> {
        let kind: ModelKind = kind.parse().map_err(value_err)?;
        let interval = trace.inner.interval_s();
        if interval <= 0 || 86_400 % interval != 0 {
            return Err(value_err("trace interval must divide one day"));
        }
        let steps_per_day = (86_400 / interval) as u32;
        let (rows, targets) = build_features(&trace.inner, steps_per_day).map_err(value_err)?;
        let inner = match kind {
            ModelKind::Linear => {
                forecast::fit_linear(&rows, &targets, steps_per_day).map_err(value_err)?
            }
            ModelKind::Svr => {
                forecast::fit_svr(&rows, &targets, &SvrHyper::default(), steps_per_day)
                    .map_err(value_err)?
            }
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        forecast::parse_model(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    /// One-step forecast for step-of-day `t` given the previous intensity.
    fn predict_one(&self, t: f64, prev_intensity: f64) -> f64 {
        forecast::predict_one(&self.inner, t, prev_intensity)
    }

    /// Recursive multi-step forecast.
    fn forecast(&self, start_step: f64, prev_intensity: f64, n: usize) -> Vec<f64> {
        forecast::forecast_horizon(&self.inner, start_step, prev_intensity, n)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("ForecastModel(kind={:?})", self.inner.kind().to_string())
    }
}

/// Cost weights and period for the power-limit selector.
#[pyclass(name = "OptimizerConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyOptimizerConfig {
    inner: OptimizerConfig,
}

#[pymethods]
impl PyOptimizerConfig {
    #[new]
    fn new(eta: f64, max_power_w: f64, max_carbon_intensity: f64, period_s: i64) -> PyResult<Self> {
        OptimizerConfig::new(eta, max_power_w, max_carbon_intensity, period_s)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn max_power_w(&self) -> f64 {
        self.inner.max_power_w
    }

    #[getter]
    fn max_carbon_intensity(&self) -> f64 {
        self.inner.max_carbon_intensity
    }

    #[getter]
    fn period_s(&self) -> i64 {
        self.inner.period_s
    }

    fn __repr__(&self) -> String {
        format!(
            "OptimizerConfig(eta={}, max_power_w={}, max_carbon_intensity={}, period_s={})",
            self.inner.eta,
            self.inner.max_power_w,
            self.inner.max_carbon_intensity,
            self.inner.period_s
        )
    }
}

/// Fixed amount of training work starting at a trace-step boundary.
#[pyclass(name = "TrainingJob", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainingJob {
    inner: TrainingJob,
}

#[pymethods]
impl PyTrainingJob {
    #[new]
    fn new(total_samples: u64, start_time: i64) -> Self {
        Self {
            inner: TrainingJob {
                total_samples,
                start_time,
            },
        }
    }

    #[getter]
    fn total_samples(&self) -> u64 {
        self.inner.total_samples
    }

    #[getter]
    fn start_time(&self) -> i64 {
        self.inner.start_time
    }
}

/// Completed simulation run; totals as attributes, full detail as JSON.
#[pyclass(name = "SimReport")]
struct PySimReport {
    inner: SimReport,
}

#[pymethods]
impl PySimReport {
    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.as_str().to_string()
    }

    #[getter]
    fn total_time_s(&self) -> f64 {
        self.inner.total_time_s
    }

    #[getter]
    fn total_energy_j(&self) -> f64 {
        self.inner.total_energy_j
    }

    #[getter]
    fn total_carbon_g(&self) -> f64 {
        self.inner.total_carbon_g
    }

    /// `(period_start, chosen_limit_w, samples_done, energy_j, carbon_g)`
    /// per period.
    fn periods(&self) -> Vec<(i64, u32, f64, f64, f64)> {
        self.inner
            .periods
            .iter()
            .map(|p| {
                (
                    p.decision.period_start,
                    p.decision.chosen_limit_w,
                    p.samples_done,
                    p.energy_j,
                    p.carbon_g,
                )
            })
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn timeline_csv(&self) -> String {
        simulator::emit_timeline(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "SimReport(mode={:?}, time_s={}, energy_j={}, carbon_g={})",
            self.inner.mode.as_str(),
            self.inner.total_time_s,
            self.inner.total_energy_j,
            self.inner.total_carbon_g
        )
    }
}

fn parse_forecaster(name: &str) -> PyResult<ForecasterSpec> {
    match name {
        "linear" => Ok(ForecasterSpec::Linear),
        "svr" => Ok(ForecasterSpec::Svr(SvrHyper::default())),
        "oracle" => Ok(ForecasterSpec::Oracle),
        other => Err(value_err(format!(
            "unknown forecaster `{other}` (linear|svr|oracle)"
        ))),
    }
}

/// Carbon emitted by a run, in grams.
#[pyfunction]
fn cta(tta_s: f64, avg_power_w: f64, avg_ci: f64) -> f64 {
    optimizer::cta(tta_s, avg_power_w, avg_ci)
}

/// Weighted carbon/time cost of a run, in grams.
#[pyfunction]
fn total_cost(tta_s: f64, avg_power_w: f64, avg_ci: f64, cfg: &PyOptimizerConfig) -> f64 {
    optimizer::total_cost(tta_s, avg_power_w, avg_ci, &cfg.inner)
}

/// Per-sample cost of running one period at `limit_w` under intensity `ci`.
#[pyfunction]
fn period_cost(
    profile: &PyPowerProfile,
    limit_w: u32,
    ci: f64,
    cfg: &PyOptimizerConfig,
) -> PyResult<f64> {
    optimizer::period_cost(&profile.inner, limit_w, ci, &cfg.inner).map_err(value_err)
}

/// Cost-minimizing limit for one period: `(chosen_limit_w, [(limit_w, cost), ...])`.
#[pyfunction]
fn select_power_limit(
    profile: &PyPowerProfile,
    forecast_ci: f64,
    cfg: &PyOptimizerConfig,
) -> (u32, Vec<(u32, f64)>) {
    let d = optimizer::select_power_limit(&profile.inner, forecast_ci, &cfg.inner, 0);
    (
        d.chosen_limit_w,
        d.limit_costs
            .iter()
            .map(|c| (c.limit_w, c.cost_g_per_sample))
            .collect(),
    )
}

/// Walk-forward evaluation; returns the evaluation report as JSON.
#[pyfunction]
#[pyo3(signature = (trace, fit_window, kinds=vec![String::from("linear"), String::from("svr")]))]
fn evaluate(trace: &PyCarbonTrace, fit_window: usize, kinds: Vec<String>) -> PyResult<String> {
    let kinds: Vec<ModelKind> = kinds
        .iter()
        .map(|k| k.parse().map_err(value_err))
        .collect::<PyResult<_>>()?;
    let report = evaluate_models(&trace.inner, fit_window, &kinds, &SvrHyper::default())
        .map_err(value_err)?;
    Ok(report.to_json())
}

/// Replays the job at the profile's maximum power limit.
#[pyfunction]
fn run_baseline(
    job: &PyTrainingJob,
    trace: &PyCarbonTrace,
    profile: &PyPowerProfile,
    period_s: i64,
) -> PyResult<PySimReport> {
    simulator::run_baseline(&job.inner, &trace.inner, &profile.inner, period_s)
        .map(|inner| PySimReport { inner })
        .map_err(sim_err)
}

/// Replays the job re-optimizing the power limit every period.
#[pyfunction]
#[pyo3(signature = (job, trace, profile, cfg, forecaster="linear", fit_hours=24, count_profiling=false))]
fn run_carbon_aware(
    job: &PyTrainingJob,
    trace: &PyCarbonTrace,
    profile: &PyPowerProfile,
    cfg: &PyOptimizerConfig,
    forecaster: &str,
    fit_hours: u32,
    count_profiling: bool,
) -> PyResult<PySimReport> {
    let spec = parse_forecaster(forecaster)?;
    let opts = AwareOptions {
        fit_hours,
        count_profiling,
    };
    simulator::run_carbon_aware(
        &job.inner,
        &trace.inner,
        &profile.inner,
        &spec,
        &cfg.inner,
        &opts,
    )
    .map(|inner| PySimReport { inner })
    .map_err(sim_err)
}

/// Percentage deltas of an aware run against its baseline, as JSON.
#[pyfunction]
fn compare(aware: &PySimReport, baseline: &PySimReport) -> PyResult<String> {
    simulator::compare(&aware.inner, &baseline.inner)
        .map(|s| s.to_json())
        .map_err(value_err)
}

#[pymodule]
fn chase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCarbonTrace>()?;
    m.add_class::<PyPowerProfile>()?;
    m.add_class::<PyForecastModel>()?;
    m.add_class::<PyOptimizerConfig>()?;
    m.add_class::<PyTrainingJob>()?;
    m.add_class::<PySimReport>()?;
    m.add_function(wrap_pyfunction!(cta, m)?)?;
    m.add_function(wrap_pyfunction!(total_cost, m)?)?;
    m.add_function(wrap_pyfunction!(period_cost, m)?)?;
    m.add_function(wrap_pyfunction!(select_power_limit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(run_carbon_aware, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
