//! Simulation run manifest: one JSON file describing a full experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chase_core::forecast::SvrHyper;
use chase_core::optimizer::OptimizerConfig;
use chase_core::simulator::{AwareOptions, ForecasterSpec, TrainingJob};
use chase_core::trace::CarbonTrace;
use chase_core::PowerProfile;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForecasterManifest {
    Linear,
    Svr {
        #[serde(flatten)]
        hyper: SvrHyper,
    },
    Oracle,
}

impl ForecasterManifest {
    pub fn to_spec(&self) -> ForecasterSpec {
        match self {
            ForecasterManifest::Linear => ForecasterSpec::Linear,
            ForecasterManifest::Svr { hyper } => ForecasterSpec::Svr(*hyper),
            ForecasterManifest::Oracle => ForecasterSpec::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JobManifest {
    pub total_samples: u64,
    pub start_time: i64,
}

/// On-disk manifest. Relative paths resolve against the manifest's
/// directory, so a manifest and its inputs can move as a bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub trace_path: PathBuf,
    pub profile_path: PathBuf,
    pub job: JobManifest,
    #[serde(default)]
    pub forecaster: Option<ForecasterManifest>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub period_s: Option<i64>,
    #[serde(default)]
    pub max_power_w: Option<f64>,
    #[serde(default)]
    pub max_carbon_intensity: Option<f64>,
    #[serde(default)]
    pub fit_hours: Option<u32>,
    #[serde(default)]
    pub count_profiling: Option<bool>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Everything a simulation run needs, with defaults filled in.
pub struct ResolvedRun {
    pub trace: CarbonTrace,
    pub profile: PowerProfile,
    pub job: TrainingJob,
    pub spec: ForecasterSpec,
    pub cfg: OptimizerConfig,
    pub opts: AwareOptions,
    pub out_dir: PathBuf,
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("invalid manifest {}: {e}", path.display())))
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunManifest {
    /// Loads the referenced inputs and fills defaults: forecaster linear,
    /// eta 0.5, period = trace interval, max power = largest profiled
    /// limit, max intensity = the fit window's maximum (whole trace in
    /// oracle mode), fit 24 h, out dir `out`.
    pub fn resolve(
        &self,
        manifest_path: &Path,
        overrides: &Overrides,
    ) -> Result<ResolvedRun, CliError> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let trace_path = resolve_path(base, &self.trace_path);
        let profile_path = resolve_path(base, &self.profile_path);
        let trace = crate::read_trace_file(&trace_path)?;
        let profile = crate::read_profile_file(&profile_path)?;

        let job = TrainingJob {
            total_samples: self.job.total_samples,
            start_time: self.job.start_time,
        };
        let spec = match &overrides.model {
            Some(kind) => kind.clone(),
            None => self
                .forecaster
                .as_ref()
                .map(ForecasterManifest::to_spec)
                .unwrap_or(ForecasterSpec::Linear),
        };
        let fit_hours = overrides
            .fit_hours
            .or(self.fit_hours)
            .unwrap_or(AwareOptions::default().fit_hours);
        let eta = overrides.eta.or(self.eta).unwrap_or(0.5);
        let period_s = overrides
            .period_s
            .or(self.period_s)
            .unwrap_or_else(|| trace.interval_s());
        let max_power_w = overrides
            .max_power_w
            .or(self.max_power_w)
            .unwrap_or_else(|| f64::from(profile.max_limit()));
        let max_ci = match overrides.max_ci.or(self.max_carbon_intensity) {
            Some(v) => v,
            None => {
                let (lo, hi) = match spec {
                    ForecasterSpec::Oracle => (trace.start_time(), trace.end_time()),
                    _ => (job.start_time - i64::from(fit_hours) * 3600, job.start_time),
                };
                trace
                    .window_max(lo.max(trace.start_time()), hi)
                    .map_err(|e| CliError::input(format!("cannot derive max intensity: {e}")))?
            }
        };
        let cfg = OptimizerConfig::new(eta, max_power_w, max_ci, period_s)
            .map_err(|e| CliError::input(e.to_string()))?;
        let opts = AwareOptions {
            fit_hours,
            count_profiling: overrides.count_profiling || self.count_profiling.unwrap_or(false),
        };
        let out_dir = match &overrides.out_dir {
            Some(d) => d.clone(),
            None => resolve_path(base, self.out_dir.as_deref().unwrap_or(Path::new("out"))),
        };
        Ok(ResolvedRun {
            trace,
            profile,
            job,
            spec,
            cfg,
            opts,
            out_dir,
        })
    }
}

/// Command-line overrides applied on top of the manifest.
#[derive(Debug, Default)]
pub struct Overrides {
    pub model: Option<ForecasterSpec>,
    pub eta: Option<f64>,
    pub period_s: Option<i64>,
    pub max_power_w: Option<f64>,
    pub max_ci: Option<f64>,
    pub fit_hours: Option<u32>,
    pub count_profiling: bool,
    pub out_dir: Option<PathBuf>,
}
