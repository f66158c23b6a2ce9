//! GPU power-limit profiles: measured average power and training throughput
//! at each candidate power limit, plus a simulated GPU to generate them.

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Tolerance for `avg_power <= limit`: real boards overshoot briefly, so a
/// measured average may exceed the cap by up to 5%.
pub const POWER_CAP_SLACK: f64 = 1.05;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("profile needs at least two entries, got {0}")]
    TooFewEntries(usize),
    #[error("duplicate power limit {0} W")]
    DuplicateLimit(u32),
    #[error("limit {limit} W: throughput must be finite and > 0, got {value}")]
    BadThroughput { limit: u32, value: f64 },
    #[error("limit {limit} W: avg_power must be finite and > 0, got {value}")]
    BadAvgPower { limit: u32, value: f64 },
    #[error("limit {limit} W: avg_power {value} exceeds limit by more than 5%")]
    AvgPowerAboveCap { limit: u32, value: f64 },
    #[error("power limit must be > 0")]
    ZeroLimit,
    #[error("no entry for limit {0} W")]
    UnknownLimit(u32),
    #[error("limit {limit} W outside simulated range (0, {max_power_w}]")]
    LimitOutsideRange { limit: u32, max_power_w: u32 },
    #[error("profiling needs at least two limits, got {0}")]
    TooFewLimits(usize),
    #[error("noise sigma must be finite and >= 0, got {0}")]
    BadNoise(f64),
    #[error("malformed profile json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One profiled operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// Enforced power cap in watts.
    pub limit_w: u32,
    /// Measured average draw at that cap, in watts.
    pub avg_power_w: f64,
    /// Measured training throughput at that cap, in samples/second.
    pub throughput_sps: f64,
}

impl ProfileEntry {
    /// Joules consumed per training sample at this operating point.
    pub fn energy_per_sample(&self) -> f64 {
        self.avg_power_w / self.throughput_sps
    }
}

/// A validated set of operating points for one GPU, sorted by limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile {
    gpu: String,
    entries: Vec<ProfileEntry>,
}

#[derive(Deserialize)]
struct ProfileDoc {
    gpu: String,
    entries: Vec<ProfileEntry>,
}

impl PowerProfile {
    /// Validates and sorts entries by limit.
    pub fn new(
        gpu: impl Into<String>,
        mut entries: Vec<ProfileEntry>,
    ) -> Result<Self, ProfileError> {
        if entries.len() < 2 {
            return Err(ProfileError::TooFewEntries(entries.len()));
        }
        entries.sort_by_key(|e| e.limit_w);
        for pair in entries.windows(2) {
            if pair[0].limit_w == pair[1].limit_w {
                return Err(ProfileError::DuplicateLimit(pair[0].limit_w));
            }
        }
        for e in &entries {
            if e.limit_w == 0 {
                return Err(ProfileError::ZeroLimit);
            }
            if !e.throughput_sps.is_finite() || e.throughput_sps <= 0.0 {
                return Err(ProfileError::BadThroughput {
                    limit: e.limit_w,
                    value: e.throughput_sps,
                });
            }
            if !e.avg_power_w.is_finite() || e.avg_power_w <= 0.0 {
                return Err(ProfileError::BadAvgPower {
                    limit: e.limit_w,
                    value: e.avg_power_w,
                });
            }
            if e.avg_power_w > f64::from(e.limit_w) * POWER_CAP_SLACK {
                return Err(ProfileError::AvgPowerAboveCap {
                    limit: e.limit_w,
                    value: e.avg_power_w,
                });
            }
        }
        Ok(Self {
            gpu: gpu.into(),
            entries,
        })
    }

    pub fn gpu(&self) -> &str {
        &self.gpu
    }

    /// Entries in ascending limit order.
    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn limits(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.limit_w)
    }

    /// Highest profiled limit (the GPU's default cap in practice).
    pub fn max_limit(&self) -> u32 {
        self.entries.last().expect("profile is never empty").limit_w
    }

    pub fn entry(&self, limit_w: u32) -> Result<&ProfileEntry, ProfileError> {
        self.entries
            .iter()
            .find(|e| e.limit_w == limit_w)
            .ok_or(ProfileError::UnknownLimit(limit_w))
    }

    /// Joules per sample at `limit_w`.
    pub fn energy_per_sample(&self, limit_w: u32) -> Result<f64, ProfileError> {
        Ok(self.entry(limit_w)?.energy_per_sample())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serialization cannot fail")
    }
}

/// Parses and validates the profile JSON format:
/// `{"gpu": "<name>", "entries": [{"limit_w", "avg_power_w", "throughput_sps"}]}`.
pub fn parse_profile(text: &str) -> Result<PowerProfile, ProfileError> {
    let doc: ProfileDoc = serde_json::from_str(text)?;
    PowerProfile::new(doc.gpu, doc.entries)
}

/// Response curve of a simulated GPU as a function of the power limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    /// `offset + slope * limit`.
    Linear { slope: f64, offset: f64 },
    /// `cap * (1 - exp(-limit / knee))`: steep at low limits, saturating.
    SaturatingExp { cap: f64, knee: f64 },
}

impl Curve {
    pub fn eval(&self, limit_w: f64) -> f64 {
        match self {
            Curve::Linear { slope, offset } => offset + slope * limit_w,
            Curve::SaturatingExp { cap, knee } => cap * (1.0 - (-limit_w / knee).exp()),
        }
    }
}

/// A synthetic GPU whose power draw and throughput follow fixed curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedGpu {
    pub name: String,
    pub max_power_w: u32,
    pub power_curve: Curve,
    pub throughput_curve: Curve,
}

impl SimulatedGpu {
    /// A 300 W part with saturating throughput, loosely shaped like a
    /// datacenter training GPU: most of the throughput is reached well
    /// below the default cap.
    pub fn a40_like() -> Self {
        Self {
            name: "sim-a40".into(),
            max_power_w: 300,
            power_curve: Curve::Linear {
                slope: 0.97,
                offset: 0.0,
            },
            throughput_curve: Curve::SaturatingExp {
                cap: 850.0,
                knee: 120.0,
            },
        }
    }
}

/// Measurement noise for [`profile_gpu`]; draws are seeded and deterministic.
#[derive(Debug, Clone, Copy)]
pub struct ProfilingNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Sweeps `limits` on a simulated GPU and returns the measured profile.
///
/// With noise, each measurement gets an independent `N(0, sigma)` draw
/// (power first, then throughput, per limit in ascending order); power is
/// clamped into `(0, limit * 1.05]` and throughput to a small positive floor
/// so the result is always a valid profile.
pub fn profile_gpu(
    gpu: &SimulatedGpu,
    limits: &[u32],
    noise: Option<ProfilingNoise>,
) -> Result<PowerProfile, ProfileError> {
    if limits.len() < 2 {
        return Err(ProfileError::TooFewLimits(limits.len()));
    }
    let mut sorted: Vec<u32> = limits.to_vec();
    sorted.sort_unstable();
    for &limit in &sorted {
        if limit == 0 || limit > gpu.max_power_w {
            return Err(ProfileError::LimitOutsideRange {
                limit,
                max_power_w: gpu.max_power_w,
            });
        }
    }
    let mut draw = match noise {
        Some(n) => {
            if !n.sigma.is_finite() || n.sigma < 0.0 {
                return Err(ProfileError::BadNoise(n.sigma));
            }
            let normal = Normal::new(0.0, n.sigma).expect("sigma validated above");
            let rng = ChaCha8Rng::seed_from_u64(n.seed);
            Some((normal, rng))
        }
        None => None,
    };
    let mut sample = move || match draw.as_mut() {
        Some((normal, rng)) => normal.sample(rng),
        None => 0.0,
    };

    let mut entries = Vec::with_capacity(sorted.len());
    for &limit in &sorted {
        let cap = f64::from(limit);
        let power = (gpu.power_curve.eval(cap) + sample()).clamp(1e-6, cap * POWER_CAP_SLACK);
        let throughput = (gpu.throughput_curve.eval(cap) + sample()).max(1e-6);
        entries.push(ProfileEntry {
            limit_w: limit,
            avg_power_w: power,
            throughput_sps: throughput,
        });
    }
    PowerProfile::new(gpu.name.clone(), entries)
}
