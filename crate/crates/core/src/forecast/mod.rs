//! Short-term carbon-intensity forecasting.
//!
//! Features per step: `sin(2*pi*t/T)`, `cos(2*pi*t/T)`, and the previous
//! intensity, where `t` is the step-of-day index and `T` the number of steps
//! per day. Both regressors (ordinary least squares and epsilon-SVR with an
//! RBF kernel) run on z-scored features and targets; the scalers are part of
//! the fitted model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trace::{CarbonTrace, TraceError};
use crate::SECONDS_PER_DAY;

mod svr;

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("steps_per_day {steps_per_day} * interval {interval_s} s must equal 86400 s")]
    BadStepsPerDay { steps_per_day: u32, interval_s: i64 },
    #[error("rows and targets differ in length: {rows} vs {targets}")]
    RowTargetMismatch { rows: usize, targets: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("bad hyperparameter: {0}")]
    BadHyper(String),
    #[error("normal equations singular even after ridge fallback")]
    Singular,
    #[error("series lengths differ: {actual} vs {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("actual value at index {0} is zero; MAPE undefined")]
    ZeroActual(usize),
    #[error("fit_window {fit_window} requires 2 <= fit_window and trace length > fit_window + 1, got length {len}")]
    BadFitWindow { fit_window: usize, len: usize },
    #[error("malformed model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// One regression input row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sin_time: f64,
    pub cos_time: f64,
    pub prev_intensity: f64,
}

impl FeatureRow {
    pub fn to_array(self) -> [f64; 3] {
        [self.sin_time, self.cos_time, self.prev_intensity]
    }
}

/// Step-of-day index for an epoch timestamp: `(epoch mod 86400) / interval`.
/// Fractional when the timestamp is not step-aligned to midnight UTC.
pub fn step_of_day(epoch_s: i64, interval_s: i64) -> f64 {
    epoch_s.rem_euclid(SECONDS_PER_DAY) as f64 / interval_s as f64
}

/// Builds one row per target index `i >= 1`: cyclical encoding of the
/// target's own step-of-day plus the previous intensity; target is
/// `intensities[i]`. Output length is trace length - 1.
pub fn build_features(
    trace: &CarbonTrace,
    steps_per_day: u32,
) -> Result<(Vec<FeatureRow>, Vec<f64>), ForecastError> {
    if trace.len() < 2 {
        return Err(ForecastError::TooFewSamples {
            needed: 2,
            got: trace.len(),
        });
    }
    check_steps_per_day(steps_per_day, trace.interval_s())?;
    let period = f64::from(steps_per_day);
    let values = trace.values();
    let mut rows = Vec::with_capacity(values.len() - 1);
    let mut targets = Vec::with_capacity(values.len() - 1);
    for i in 1..values.len() {
        let t = step_of_day(trace.timestamp(i), trace.interval_s());
        let angle = 2.0 * std::f64::consts::PI * t / period;
        rows.push(FeatureRow {
            sin_time: angle.sin(),
            cos_time: angle.cos(),
            prev_intensity: values[i - 1],
        });
        targets.push(values[i]);
    }
    Ok((rows, targets))
}

fn check_steps_per_day(steps_per_day: u32, interval_s: i64) -> Result<(), ForecastError> {
    if steps_per_day == 0 || i64::from(steps_per_day) * interval_s != SECONDS_PER_DAY {
        return Err(ForecastError::BadStepsPerDay {
            steps_per_day,
            interval_s,
        });
    }
    Ok(())
}

/// Mean and standard deviation of one series, as used for z-scoring.
/// A constant series stores std 1.0 so its standardized column is zero
/// (the feature is neutralized, never a division by zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerStat {
    pub mean: f64,
    pub std: f64,
}

impl ScalerStat {
    pub fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
        }
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        self.mean + z * self.std
    }
}

/// SVR hyperparameters. Epsilon is in standardized target units.
/// Fields omitted from a serialized form take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrHyper {
    pub c: f64,
    pub epsilon: f64,
    /// Kernel width; `None` picks `1 / (3 * mean standardized feature
    /// variance)` (3 is the feature count).
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SvrHyper {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000,
        }
    }
}

impl SvrHyper {
    fn validate(&self) -> Result<(), ForecastError> {
        let bad = |msg: String| Err(ForecastError::BadHyper(msg));
        if !self.c.is_finite() || self.c <= 0.0 {
            return bad(format!("C must be > 0, got {}", self.c));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() || g <= 0.0 {
                return bad(format!("gamma must be > 0, got {g}"));
            }
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        Ok(())
    }
}

/// Which regressor to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Svr,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Linear => write!(f, "linear"),
            ModelKind::Svr => write!(f, "svr"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "svr" => Ok(ModelKind::Svr),
            other => Err(format!("unknown model kind `{other}` (linear|svr)")),
        }
    }
}

/// Kind-specific parameters, all in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Linear {
        /// `[bias, w_sin, w_cos, w_prev]`.
        coefficients: [f64; 4],
    },
    Svr {
        gamma: f64,
        c: f64,
        epsilon: f64,
        bias: f64,
        support_vectors: Vec<[f64; 3]>,
        dual_coefs: Vec<f64>,
        converged: bool,
        iterations: u64,
    },
}

/// A fitted forecaster: scalers plus regressor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub steps_per_day: u32,
    pub feature_scaler: [ScalerStat; 3],
    pub target_scaler: ScalerStat,
    #[serde(flatten)]
    pub params: ModelParams,
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Linear { .. } => ModelKind::Linear,
            ModelParams::Svr { .. } => ModelKind::Svr,
        }
    }

    /// False only for an SVR fit that hit max_iter before reaching tol.
    pub fn converged(&self) -> bool {
        match &self.params {
            ModelParams::Linear { .. } => true,
            ModelParams::Svr { converged, .. } => *converged,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }
}

/// Parses a model back from [`ForecastModel::to_json`].
pub fn parse_model(text: &str) -> Result<ForecastModel, ForecastError> {
    Ok(serde_json::from_str(text)?)
}

fn validate_rows(rows: &[FeatureRow], targets: &[f64]) -> Result<(), ForecastError> {
    if rows.len() != targets.len() {
        return Err(ForecastError::RowTargetMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    for r in rows {
        if !(r.sin_time.is_finite() && r.cos_time.is_finite() && r.prev_intensity.is_finite()) {
            return Err(ForecastError::NonFinite("feature row"));
        }
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(ForecastError::NonFinite("target"));
    }
    Ok(())
}

fn fit_scalers(rows: &[FeatureRow], targets: &[f64]) -> ([ScalerStat; 3], ScalerStat) {
    let col = |f: fn(&FeatureRow) -> f64| ScalerStat::fit(rows.iter().map(f));
    (
        [
            col(|r| r.sin_time),
            col(|r| r.cos_time),
            col(|r| r.prev_intensity),
        ],
        ScalerStat::fit(targets.iter().copied()),
    )
}

fn standardize(rows: &[FeatureRow], scaler: &[ScalerStat; 3]) -> Vec<[f64; 3]> {
    rows.iter()
        .map(|r| {
            let raw = r.to_array();
            [
                scaler[0].transform(raw[0]),
                scaler[1].transform(raw[1]),
                scaler[2].transform(raw[2]),
            ]
        })
        .collect()
}

/// Solves `A x = b` for symmetric positive-definite `A` (4x4 Cholesky).
#[allow(clippy::needless_range_loop)]
fn cholesky_solve(a: [[f64; 4]; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let mut l = [[0.0f64; 4]; 4];
    for j in 0..4 {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..4 {
            let mut v = a[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / l[j][j];
        }
    }
    let mut y = [0.0f64; 4];
    for i in 0..4 {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i][k] * y[k];
        }
        y[i] = v / l[i][i];
    }
    let mut x = [0.0f64; 4];
    for i in (0..4).rev() {
        let mut v = y[i];
        for k in (i + 1)..4 {
            v -= l[k][i] * x[k];
        }
        x[i] = v / l[i][i];
    }
    Some(x)
}

/// Ordinary least squares on standardized data via normal equations, with a
/// ridge fallback (lambda = 1e-8) if the Gram matrix is singular.
pub fn fit_linear(
    rows: &[FeatureRow],
    targets: &[f64],
    steps_per_day: u32,
) -> Result<ForecastModel, ForecastError> {
    validate_rows(rows, targets)?;
    if rows.len() < 4 {
        return Err(ForecastError::TooFewSamples {
            needed: 4,
            got: rows.len(),
        });
    }
    let (feature_scaler, target_scaler) = fit_scalers(rows, targets);
    let zx = standardize(rows, &feature_scaler);
    let zy: Vec<f64> = targets
        .iter()
        .map(|&t| target_scaler.transform(t))
        .collect();

    // design row: [1, sin, cos, prev]
    let mut gram = [[0.0f64; 4]; 4];
    let mut rhs = [0.0f64; 4];
    for (x, &y) in zx.iter().zip(&zy) {
        let d = [1.0, x[0], x[1], x[2]];
        for i in 0..4 {
            for j in 0..4 {
                gram[i][j] += d[i] * d[j];
            }
            rhs[i] += d[i] * y;
        }
    }
    let coefficients = match cholesky_solve(gram, rhs) {
        Some(c) => c,
        None => {
            let mut damped = gram;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += 1e-8;
            }
            cholesky_solve(damped, rhs).ok_or(ForecastError::Singular)?
        }
    };
    Ok(ForecastModel {
        steps_per_day,
        feature_scaler,
        target_scaler,
        params: ModelParams::Linear { coefficients },
    })
}

/// Epsilon-SVR with an RBF kernel, solved in the dual to tolerance
/// `hyper.tol`. Hitting `max_iter` is not an error: the model carries
/// `converged: false` and the best iterate.
pub fn fit_svr(
    rows: &[FeatureRow],
    targets: &[f64],
    hyper: &SvrHyper,
    steps_per_day: u32,
) -> Result<ForecastModel, ForecastError> {
    validate_rows(rows, targets)?;
    hyper.validate()?;
    if rows.len() < 2 {
        return Err(ForecastError::TooFewSamples {
            needed: 2,
            got: rows.len(),
        });
    }
    let (feature_scaler, target_scaler) = fit_scalers(rows, targets);
    let zx = standardize(rows, &feature_scaler);
    let zy: Vec<f64> = targets
        .iter()
        .map(|&t| target_scaler.transform(t))
        .collect();

    let gamma = hyper.gamma.unwrap_or_else(|| {
        let n = zx.len() as f64;
        let mut mean_var = 0.0;
        for k in 0..3 {
            let mean = zx.iter().map(|x| x[k]).sum::<f64>() / n;
            mean_var += zx
                .iter()
                .map(|x| (x[k] - mean) * (x[k] - mean))
                .sum::<f64>()
                / n;
        }
        mean_var /= 3.0;
        if mean_var > 1e-12 {
            1.0 / (3.0 * mean_var)
        } else {
            1.0
        }
    });

    let sol = svr::solve(
        &zx,
        &zy,
        hyper.c,
        hyper.epsilon,
        gamma,
        hyper.tol,
        hyper.max_iter,
    );
    if !sol.converged {
        log::warn!(
            "svr did not reach tol {} within {} iterations (gap {})",
            hyper.tol,
            hyper.max_iter,
            sol.gap
        );
    }
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (x, &w) in zx.iter().zip(&sol.beta_net) {
        if w != 0.0 {
            support_vectors.push(*x);
            dual_coefs.push(w);
        }
    }
    Ok(ForecastModel {
        steps_per_day,
        feature_scaler,
        target_scaler,
        params: ModelParams::Svr {
            gamma,
            c: hyper.c,
            epsilon: hyper.epsilon,
            bias: sol.bias,
            support_vectors,
            dual_coefs,
            converged: sol.converged,
            iterations: sol.iterations,
        },
    })
}

/// One-step forecast for the step-of-day index `t` (may be fractional)
/// given the previous intensity. Clamped below at 0.
pub fn predict_one(model: &ForecastModel, t: f64, prev_intensity: f64) -> f64 {
    let period = f64::from(model.steps_per_day);
    let angle = 2.0 * std::f64::consts::PI * t / period;
    let z = [
        model.feature_scaler[0].transform(angle.sin()),
        model.feature_scaler[1].transform(angle.cos()),
        model.feature_scaler[2].transform(prev_intensity),
    ];
    let zy = match &model.params {
        ModelParams::Linear { coefficients } => {
            coefficients[0]
                + coefficients[1] * z[0]
                + coefficients[2] * z[1]
                + coefficients[3] * z[2]
        }
        ModelParams::Svr {
            gamma,
            bias,
            support_vectors,
            dual_coefs,
            ..
        } => {
            support_vectors
                .iter()
                .zip(dual_coefs)
                .map(|(sv, w)| w * svr::rbf(sv, &z, *gamma))
                .sum::<f64>()
                + bias
        }
    };
    model.target_scaler.inverse(zy).max(0.0)
}

/// Recursive multi-step forecast: prediction `k` feeds `prev` of `k + 1`.
/// Steps advance by one from `start_step`.
pub fn forecast_horizon(model: &ForecastModel, start_step: f64, prev: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut last = prev;
    for k in 0..n {
        let p = predict_one(model, start_step + k as f64, last);
        out.push(p);
        last = p;
    }
    out
}

/// Mean absolute percentage error: `100/n * sum |a - p| / |a|`.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, ForecastError> {
    if actual.len() != predicted.len() {
        return Err(ForecastError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(ForecastError::EmptySeries);
    }
    let mut sum = 0.0;
    for (i, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
        if a == 0.0 {
            return Err(ForecastError::ZeroActual(i));
        }
        sum += (a - p).abs() / a.abs();
    }
    Ok(100.0 * sum / actual.len() as f64)
}

/// One model's walk-forward result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub model: String,
    pub mape_pct: f64,
    pub predictions: Vec<f64>,
}

/// Walk-forward evaluation over the tail of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub interval_s: i64,
    pub fit_points: usize,
    pub test_points: usize,
    pub actual: Vec<f64>,
    pub models: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Fits each requested model on the first `fit_window` points, then
/// walk-forward one-step evaluates over the remainder, feeding the TRUE
/// previous intensity at each step (the controller always knows the last
/// observed value). A persistence baseline (predict(t) = actual(t-1)) is
/// always appended.
pub fn evaluate_models(
    trace: &CarbonTrace,
    fit_window: usize,
    kinds: &[ModelKind],
    svr_hyper: &SvrHyper,
) -> Result<EvalReport, ForecastError> {
    let len = trace.len();
    if fit_window < 2 || len <= fit_window + 1 {
        return Err(ForecastError::BadFitWindow { fit_window, len });
    }
    let interval = trace.interval_s();
    if SECONDS_PER_DAY % interval != 0 {
        return Err(ForecastError::BadStepsPerDay {
            steps_per_day: 0,
            interval_s: interval,
        });
    }
    let steps_per_day = (SECONDS_PER_DAY / interval) as u32;

    let fit_end = trace.start_time() + fit_window as i64 * interval;
    let fit_trace = trace.slice(trace.start_time(), fit_end)?;
    let (rows, targets) = build_features(&fit_trace, steps_per_day)?;

    let mut fitted: Vec<(String, ForecastModel)> = Vec::new();
    for kind in kinds {
        if fitted.iter().any(|(name, _)| name == &kind.to_string()) {
            continue;
        }
        let model = match kind {
            ModelKind::Linear => fit_linear(&rows, &targets, steps_per_day)?,
            ModelKind::Svr => fit_svr(&rows, &targets, svr_hyper, steps_per_day)?,
        };
        fitted.push((kind.to_string(), model));
    }

    let values = trace.values();
    let test_points = len - fit_window;
    let actual: Vec<f64> = values[fit_window..].to_vec();
    let mut models = Vec::with_capacity(fitted.len() + 1);
    for (name, model) in &fitted {
        let mut predictions = Vec::with_capacity(test_points);
        for i in fit_window..len {
            let t = step_of_day(trace.timestamp(i), interval);
            predictions.push(predict_one(model, t, values[i - 1]));
        }
        models.push(EvalEntry {
            model: name.clone(),
            mape_pct: mape(&actual, &predictions)?,
            predictions,
        });
    }
    let persistence: Vec<f64> = (fit_window..len).map(|i| values[i - 1]).collect();
    models.push(EvalEntry {
        model: "persistence".into(),
        mape_pct: mape(&actual, &persistence)?,
        predictions: persistence,
    });

    Ok(EvalReport {
        split: format!(
            "fit on first {fit_window} points ({} h), walk-forward one-step over {test_points} test points",
            fit_window as i64 * interval / 3600
        ),
        interval_s: interval,
        fit_points: fit_window,
        test_points,
        actual,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_trace, SynthParams};

    fn sinusoid_trace(len: usize) -> CarbonTrace {
        synth_trace(&SynthParams {
            noise_sigma: 0.0,
            len,
            ..SynthParams::default()
        })
        .unwrap()
    }

    #[test]
    fn features_encode_step_of_day() {
        let trace = sinusoid_trace(49);
        let (rows, targets) = build_features(&trace, 48).unwrap();
        assert_eq!(rows.len(), 48);
        assert_eq!(targets.len(), 48);
        // row for target index 12 sits at quarter period
        assert!((rows[11].sin_time - 1.0).abs() < 1e-12);
        assert!(rows[11].cos_time.abs() < 1e-12);
        // half period
        assert!(rows[23].sin_time.abs() < 1e-12);
        assert!((rows[23].cos_time + 1.0).abs() < 1e-12);
        for r in &rows {
            let norm = r.sin_time * r.sin_time + r.cos_time * r.cos_time;
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert_eq!(rows[0].prev_intensity, trace.values()[0]);
        assert_eq!(targets[0], trace.values()[1]);

        assert!(matches!(
            build_features(&trace, 47),
            Err(ForecastError::BadStepsPerDay { .. })
        ));
    }

    #[test]
    fn phase_is_wall_clock_anchored() {
        // same wall-clock content, trace starts 6 steps past midnight
        let trace = synth_trace(&SynthParams {
            noise_sigma: 0.0,
            len: 49,
            start_time: 6 * 1800,
            ..SynthParams::default()
        })
        .unwrap();
        let (rows, _) = build_features(&trace, 48).unwrap();
        // target index 6 is step 12 of the day
        assert!((rows[5].sin_time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_recovers_sinusoid_exactly() {
        let trace = sinusoid_trace(96);
        let (rows, targets) = build_features(&trace, 48).unwrap();
        let model = fit_linear(&rows, &targets, 48).unwrap();
        for (i, (r, &y)) in rows.iter().zip(&targets).enumerate() {
            // row i targets trace index i + 1; the trace starts at midnight
            let p = predict_one(&model, (i + 1) as f64, r.prev_intensity);
            assert!((p - y).abs() <= 1e-6 * y.abs(), "{p} vs {y}");
        }
    }

    #[test]
    fn linear_constant_target_is_intercept_only() {
        let trace = CarbonTrace::new(0, 1800, vec![500.0; 49]).unwrap();
        let (rows, targets) = build_features(&trace, 48).unwrap();
        let model = fit_linear(&rows, &targets, 48).unwrap();
        for t in [0.0, 7.5, 23.0, 40.0] {
            assert!((predict_one(&model, t, 500.0) - 500.0).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_clamps_at_zero_and_honors_constant_model() {
        let identity = ScalerStat {
            mean: 0.0,
            std: 1.0,
        };
        let constant = ForecastModel {
            steps_per_day: 48,
            feature_scaler: [identity; 3],
            target_scaler: identity,
            params: ModelParams::Linear {
                coefficients: [500.0, 0.0, 0.0, 0.0],
            },
        };
        assert_eq!(predict_one(&constant, 3.0, 999.0), 500.0);
        assert_eq!(predict_one(&constant, 40.0, 0.0), 500.0);

        let negative = ForecastModel {
            params: ModelParams::Linear {
                coefficients: [-100.0, 0.0, 0.0, 0.0],
            },
            ..constant
        };
        assert_eq!(predict_one(&negative, 3.0, 10.0), 0.0);
    }

    #[test]
    fn horizon_recursion_matches_manual_unroll() {
        let identity = ScalerStat {
            mean: 0.0,
            std: 1.0,
        };
        let model = ForecastModel {
            steps_per_day: 48,
            feature_scaler: [identity; 3],
            target_scaler: identity,
            params: ModelParams::Linear {
                coefficients: [10.0, 2.0, 0.0, 0.5],
            },
        };
        let got = forecast_horizon(&model, 3.0, 100.0, 4);
        let mut prev = 100.0;
        for (k, &g) in got.iter().enumerate() {
            let want = predict_one(&model, 3.0 + k as f64, prev);
            assert_eq!(g, want);
            prev = want;
        }

        let constant = ForecastModel {
            params: ModelParams::Linear {
                coefficients: [500.0, 0.0, 0.0, 0.0],
            },
            ..model
        };
        assert_eq!(forecast_horizon(&constant, 0.0, 77.0, 3), vec![500.0; 3]);
    }

    #[test]
    fn mape_definition_and_errors() {
        assert_eq!(mape(&[100.0, 200.0], &[100.0, 200.0]).unwrap(), 0.0);
        assert_eq!(mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap(), 10.0);
        // scale invariance
        let a = mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
        let b = mape(&[300.0, 600.0], &[330.0, 540.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(matches!(
            mape(&[0.0], &[1.0]),
            Err(ForecastError::ZeroActual(0))
        ));
        assert!(matches!(
            mape(&[1.0], &[1.0, 2.0]),
            Err(ForecastError::LengthMismatch { .. })
        ));
        assert!(matches!(mape(&[], &[]), Err(ForecastError::EmptySeries)));
    }

    #[test]
    fn svr_flat_target_predicts_constant() {
        let trace = CarbonTrace::new(0, 1800, vec![420.0; 49]).unwrap();
        let (rows, targets) = build_features(&trace, 48).unwrap();
        let model = fit_svr(&rows, &targets, &SvrHyper::default(), 48).unwrap();
        assert!(model.converged());
        // constant series stores std 1.0, so the tube is epsilon wide in g/kWh
        for t in [0.0, 10.0, 30.0] {
            assert!((predict_one(&model, t, 420.0) - 420.0).abs() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn svr_duals_respect_box_and_count() {
        let trace = synth_trace(&SynthParams {
            len: 96,
            ..SynthParams::default()
        })
        .unwrap();
        let (rows, targets) = build_features(&trace, 48).unwrap();
        let hyper = SvrHyper::default();
        let model = fit_svr(&rows, &targets, &hyper, 48).unwrap();
        match &model.params {
            ModelParams::Svr {
                support_vectors,
                dual_coefs,
                ..
            } => {
                assert_eq!(support_vectors.len(), dual_coefs.len());
                assert!(!dual_coefs.is_empty());
                assert!(dual_coefs.iter().all(|w| w.abs() <= hyper.c + 1e-12));
            }
            _ => panic!("expected svr params"),
        }
    }

    #[test]
    fn svr_one_step_tracks_noiseless_sinusoid() {
        let trace = sinusoid_trace(144);
        let report = evaluate_models(&trace, 48, &[ModelKind::Svr], &SvrHyper::default()).unwrap();
        let svr = &report.models[0];
        assert_eq!(svr.model, "svr");
        assert!(svr.mape_pct < 2.0, "svr mape {}", svr.mape_pct);
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let trace = synth_trace(&SynthParams {
            len: 96,
            ..SynthParams::default()
        })
        .unwrap();
        let (rows, targets) = build_features(&trace, 48).unwrap();
        for kind in [ModelKind::Linear, ModelKind::Svr] {
            let model = match kind {
                ModelKind::Linear => fit_linear(&rows, &targets, 48).unwrap(),
                ModelKind::Svr => fit_svr(&rows, &targets, &SvrHyper::default(), 48).unwrap(),
            };
            let json = model.to_json();
            let back = parse_model(&json).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.kind(), kind);
            assert_eq!(back.to_json(), json);
        }
    }

    #[test]
    fn evaluate_models_shapes_and_ordering() {
        let trace = synth_trace(&SynthParams::default()).unwrap();
        let report = evaluate_models(
            &trace,
            48,
            &[ModelKind::Linear, ModelKind::Svr, ModelKind::Linear],
            &SvrHyper::default(),
        )
        .unwrap();
        assert_eq!(report.fit_points, 48);
        assert_eq!(report.test_points, 504);
        assert_eq!(report.actual.len(), 504);
        let names: Vec<&str> = report.models.iter().map(|m| m.model.as_str()).collect();
        assert_eq!(names, vec!["linear", "svr", "persistence"]);
        for m in &report.models {
            assert_eq!(m.predictions.len(), 504);
            assert!(m.mape_pct >= 0.0);
        }
        // sinusoid+noise: the fitted models beat persistence
        let by_name = |n: &str| {
            report
                .models
                .iter()
                .find(|m| m.model == n)
                .unwrap()
                .mape_pct
        };
        assert!(by_name("linear") <= by_name("persistence"));

        assert!(matches!(
            evaluate_models(&trace, 551, &[ModelKind::Linear], &SvrHyper::default()),
            Err(ForecastError::BadFitWindow { .. })
        ));
    }

    #[test]
    fn persistence_on_constant_trace_is_exact() {
        let trace = CarbonTrace::new(0, 1800, vec![500.0; 60]).unwrap();
        let report = evaluate_models(&trace, 10, &[], &SvrHyper::default()).unwrap();
        assert_eq!(report.models.len(), 1);
        assert_eq!(report.models[0].model, "persistence");
        assert_eq!(report.models[0].mape_pct, 0.0);
    }
}
