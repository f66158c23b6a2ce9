//! Seeded synthetic diurnal traces for tests, demos, and benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::trace::{CarbonTrace, TraceError};
use crate::SECONDS_PER_DAY;

/// Parameters for [`synth_trace`].
#[derive(Debug, Clone)]
pub struct SynthParams {
    /// Mean intensity in g/kWh.
    pub mean: f64,
    /// Sinusoid amplitude in g/kWh.
    pub amplitude: f64,
    /// Sinusoid period in steps (48 steps at 1800 s is one day).
    pub period_steps: u32,
    /// Standard deviation of additive Gaussian noise; 0 disables noise.
    pub noise_sigma: f64,
    /// Number of samples to generate.
    pub len: usize,
    /// Step width in seconds.
    pub interval_s: i64,
    /// Epoch start of the first sample; sets the sinusoid phase so two
    /// traces with different starts line up on wall-clock time.
    pub start_time: i64,
    /// RNG seed; equal seeds give bit-identical traces.
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            mean: 550.0,
            amplitude: 150.0,
            period_steps: 48,
            noise_sigma: 10.0,
            len: 552,
            interval_s: 1800,
            start_time: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("period_steps must be >= 1")]
    BadPeriod,
    #[error("noise_sigma must be finite and >= 0, got {0}")]
    BadSigma(f64),
    #[error("mean and amplitude must be finite")]
    BadLevel,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Generates `mean + amplitude*sin(2*pi*step/period) + N(0, sigma)`,
/// clamped at zero. `step` counts from the start of the day containing
/// `start_time`, so the phase is anchored to wall-clock time.
pub fn synth_trace(params: &SynthParams) -> Result<CarbonTrace, SynthError> {
    if params.period_steps == 0 {
        return Err(SynthError::BadPeriod);
    }
    if !params.noise_sigma.is_finite() || params.noise_sigma < 0.0 {
        return Err(SynthError::BadSigma(params.noise_sigma));
    }
    if !params.mean.is_finite() || !params.amplitude.is_finite() {
        return Err(SynthError::BadLevel);
    }
    if params.interval_s <= 0 {
        return Err(SynthError::Trace(TraceError::BadInterval {
            interval_s: params.interval_s,
        }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = if params.noise_sigma > 0.0 {
        Some(Normal::new(0.0, params.noise_sigma).expect("sigma validated above"))
    } else {
        None
    };
    let period = f64::from(params.period_steps);
    let phase0 = params.start_time.rem_euclid(SECONDS_PER_DAY) as f64 / params.interval_s as f64;
    let mut values = Vec::with_capacity(params.len);
    for i in 0..params.len {
        let step = phase0 + i as f64;
        let base =
            params.mean + params.amplitude * (2.0 * std::f64::consts::PI * step / period).sin();
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        values.push((base + eps).max(0.0));
    }
    Ok(CarbonTrace::new(
        params.start_time,
        params.interval_s,
        values,
    )?)
}
