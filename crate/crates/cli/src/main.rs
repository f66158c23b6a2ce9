//! `chase`: fetch carbon-intensity traces, evaluate forecasters, and replay
//! training jobs under a carbon-aware power-limit controller.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chase_core::forecast::{evaluate_models, ModelKind, SvrHyper};
use chase_core::simulator::{
    compare, emit_timeline, parse_report, run_baseline, run_carbon_aware, ForecasterSpec, SimError,
    SimReport,
};
use chase_core::synth::{synth_trace, SynthParams};
use chase_core::trace::{
    fetch_trace, parse_trace, parse_trace_filled, CarbonTrace, FillPolicy, TraceFormat, TraceSource,
};
use chase_core::PowerProfile;

use manifest::{load_manifest, ForecasterManifest, Overrides};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    pub(crate) fn input(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    fn from_sim(err: SimError) -> Self {
        let code = match err {
            SimError::TraceExhausted { .. } => 3,
            _ => 2,
        };
        Self {
            message: err.to_string(),
            code,
        }
    }
}

#[derive(Parser)]
#[command(name = "chase", version, about = "Carbon-aware training control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch or check carbon-intensity traces
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Evaluate forecast models on a trace
    #[command(subcommand)]
    Forecast(ForecastCmd),
    /// Replay a training job from a run manifest
    Simulate(SimulateArgs),
    /// Diff two simulation reports
    Compare(CompareArgs),
    /// Generate a seeded sinusoid-plus-noise trace
    SynthTrace(SynthArgs),
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Fetch a trace from a file or an HTTP service and normalize it
    Fetch(TraceFetchArgs),
    /// Parse a trace file and report its shape
    Validate(TraceValidateArgs),
}

#[derive(Subcommand)]
enum ForecastCmd {
    /// Walk-forward one-step evaluation against persistence
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for TraceFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => TraceFormat::Csv,
            OutFormat::Json => TraceFormat::Json,
        }
    }
}

#[derive(Args)]
struct TraceFetchArgs {
    /// Local trace file instead of the HTTP service
    #[arg(long, conflicts_with = "region")]
    file: Option<PathBuf>,
    /// Region identifier for the HTTP service
    #[arg(long)]
    region: Option<String>,
    /// HTTP base URL for the trace service
    #[arg(long, env = "CHASE_TRACE_ENDPOINT")]
    endpoint: Option<String>,
    /// Window start (epoch seconds)
    #[arg(long)]
    start: Option<i64>,
    /// Window end (epoch seconds, exclusive)
    #[arg(long)]
    end: Option<i64>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceValidateArgs {
    /// Trace file (.csv or .json)
    #[arg(long)]
    file: PathBuf,
    /// Forward-fill single missing steps instead of rejecting them
    #[arg(long)]
    hold_single: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Trace file (.csv or .json)
    #[arg(long)]
    trace: PathBuf,
    /// Hours of the trace head used for fitting
    #[arg(long, default_value_t = 24)]
    fit_hours: u32,
    /// Model to evaluate (repeatable); defaults to linear and svr
    #[arg(long = "model")]
    models: Vec<ModelKind>,
    /// Directory for forecast_eval.json
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    /// Replay at the maximum power limit instead of the controller
    #[arg(long)]
    baseline: bool,
    /// Feed true future intensities instead of a fitted forecaster
    #[arg(long, conflicts_with = "model")]
    oracle_forecast: bool,
    /// Forecaster kind override: linear, svr, or oracle
    #[arg(long)]
    model: Option<String>,
    /// Carbon/time trade-off weight in [0, 1]
    #[arg(long)]
    eta: Option<f64>,
    /// Re-optimization period (seconds)
    #[arg(long)]
    period_s: Option<i64>,
    /// Maximum GPU power for the time-cost term (watts)
    #[arg(long)]
    max_power_w: Option<f64>,
    /// Maximum carbon intensity for the time-cost term (g/kWh)
    #[arg(long)]
    max_ci: Option<f64>,
    /// Hours of pre-job trace used to fit the forecaster
    #[arg(long)]
    fit_hours: Option<u32>,
    /// Charge one trace step per profiled limit before the job
    #[arg(long)]
    count_profiling: bool,
    /// Output directory override
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Carbon-aware run report (JSON)
    aware: PathBuf,
    /// Baseline run report (JSON)
    baseline: PathBuf,
    /// Directory for compare.json
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Mean intensity (g/kWh)
    #[arg(long, default_value_t = 550.0)]
    mean: f64,
    /// Sinusoid amplitude (g/kWh)
    #[arg(long, default_value_t = 150.0)]
    amplitude: f64,
    /// Diurnal period in steps
    #[arg(long, default_value_t = 48)]
    period: u32,
    /// Gaussian noise sigma (g/kWh); 0 disables noise
    #[arg(long, default_value_t = 10.0)]
    noise_sigma: f64,
    /// Number of steps
    #[arg(long, default_value_t = 552)]
    length: usize,
    /// Step width (seconds)
    #[arg(long, default_value_t = 1800)]
    interval_s: i64,
    /// Epoch seconds of the first step
    #[arg(long, default_value_t = 0)]
    start_time: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn trace_format_of(path: &Path) -> TraceFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => TraceFormat::Csv,
        _ => TraceFormat::Json,
    }
}

pub fn read_trace_file(path: &Path) -> Result<CarbonTrace, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read trace {}: {e}", path.display())))?;
    parse_trace(&text, trace_format_of(path))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_profile_file(path: &Path) -> Result<PowerProfile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read profile {}: {e}", path.display())))?;
    chase_core::profile::parse_profile(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_trace_fetch(args: &TraceFetchArgs) -> Result<(), CliError> {
    let trace = match (&args.file, &args.region) {
        (Some(path), _) => {
            let trace = read_trace_file(path)?;
            match (args.start, args.end) {
                (None, None) => trace,
                (s, e) => trace
                    .slice(
                        s.unwrap_or_else(|| trace.start_time()),
                        e.unwrap_or_else(|| trace.end_time()),
                    )
                    .map_err(|err| CliError::input(err.to_string()))?,
            }
        }
        (None, Some(region)) => {
            let endpoint = args.endpoint.clone().ok_or_else(|| {
                CliError::input("no trace endpoint: pass --endpoint or set CHASE_TRACE_ENDPOINT")
            })?;
            let (start, end) = match (args.start, args.end) {
                (Some(s), Some(e)) => (s, e),
                _ => {
                    return Err(CliError::input(
                        "--start and --end are required with --region",
                    ))
                }
            };
            let source = TraceSource::Http {
                endpoint,
                region: region.clone(),
            };
            fetch_trace(&source, (start, end)).map_err(|e| CliError::input(e.to_string()))?
        }
        (None, None) => return Err(CliError::input("pass --file or --region")),
    };
    write_output(&args.out, &trace.serialize(args.format.into()))
}

fn cmd_trace_validate(args: &TraceValidateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| CliError::input(format!("cannot read trace {}: {e}", args.file.display())))?;
    let policy = if args.hold_single {
        FillPolicy::HoldSingle
    } else {
        FillPolicy::Reject
    };
    let (trace, filled) = parse_trace_filled(&text, trace_format_of(&args.file), policy)
        .map_err(|e| CliError::input(format!("{}: {e}", args.file.display())))?;
    let min = trace.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = trace
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "ok: {} points, interval {} s, span [{}, {}), intensity [{min}, {max}] g/kWh",
        trace.len(),
        trace.interval_s(),
        trace.start_time(),
        trace.end_time(),
    );
    if !filled.is_empty() {
        println!(
            "filled {} single-step gap(s) at: {}",
            filled.len(),
            filled
                .iter()
                .map(i64::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(())
}

fn cmd_forecast_eval(args: &EvalArgs) -> Result<(), CliError> {
    let trace = read_trace_file(&args.trace)?;
    let fit_seconds = i64::from(args.fit_hours) * 3600;
    if args.fit_hours == 0 || fit_seconds % trace.interval_s() != 0 {
        return Err(CliError::input(format!(
            "--fit-hours {} is not a whole number of {}-second steps",
            args.fit_hours,
            trace.interval_s()
        )));
    }
    let fit_window = (fit_seconds / trace.interval_s()) as usize;
    let kinds = if args.models.is_empty() {
        vec![ModelKind::Linear, ModelKind::Svr]
    } else {
        args.models.clone()
    };
    let report = evaluate_models(&trace, fit_window, &kinds, &SvrHyper::default())
        .map_err(|e| CliError::input(e.to_string()))?;

    println!("{}", report.split);
    let name_width = report
        .models
        .iter()
        .map(|m| m.model.len())
        .max()
        .unwrap_or(5)
        .max("model".len());
    println!("{:<name_width$}  {:>12}", "model", "mape_pct");
    for entry in &report.models {
        println!("{:<name_width$}  {:>12.6}", entry.model, entry.mape_pct);
    }
    let path = write_artifact(&args.out_dir, "forecast_eval.json", &report.to_json())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_model_override(
    name: &str,
    from_manifest: Option<&ForecasterManifest>,
) -> Result<ForecasterSpec, CliError> {
    match name {
        "linear" => Ok(ForecasterSpec::Linear),
        "oracle" => Ok(ForecasterSpec::Oracle),
        "svr" => Ok(match from_manifest {
            Some(ForecasterManifest::Svr { hyper }) => ForecasterSpec::Svr(*hyper),
            _ => ForecasterSpec::Svr(SvrHyper::default()),
        }),
        other => Err(CliError::input(format!(
            "unknown model `{other}` (linear|svr|oracle)"
        ))),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let model = if args.oracle_forecast {
        Some(ForecasterSpec::Oracle)
    } else if let Some(name) = &args.model {
        Some(parse_model_override(name, manifest.forecaster.as_ref())?)
    } else {
        None
    };
    let overrides = Overrides {
        model,
        eta: args.eta,
        period_s: args.period_s,
        max_power_w: args.max_power_w,
        max_ci: args.max_ci,
        fit_hours: args.fit_hours,
        count_profiling: args.count_profiling,
        out_dir: args.out_dir.clone(),
    };
    let run = manifest.resolve(&args.manifest, &overrides)?;

    let (report, stem) = if args.baseline {
        let report = run_baseline(&run.job, &run.trace, &run.profile, run.cfg.period_s)
            .map_err(CliError::from_sim)?;
        (report, "baseline")
    } else {
        let report = run_carbon_aware(
            &run.job,
            &run.trace,
            &run.profile,
            &run.spec,
            &run.cfg,
            &run.opts,
        )
        .map_err(CliError::from_sim)?;
        (report, "aware")
    };

    write_artifact(
        &run.out_dir,
        &format!("{stem}_report.json"),
        &report.to_json(),
    )?;
    write_artifact(
        &run.out_dir,
        &format!("{stem}_timeline.csv"),
        &emit_timeline(&report),
    )?;
    println!(
        "{}: time {:.3} s, energy {:.3} J, carbon {:.6} g ({} periods) -> {}",
        report.mode.as_str(),
        report.total_time_s,
        report.total_energy_j,
        report.total_carbon_g,
        report.periods.len(),
        run.out_dir.display(),
    );
    Ok(())
}

fn read_report(path: &Path) -> Result<SimReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read report {}: {e}", path.display())))?;
    parse_report(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let aware = read_report(&args.aware)?;
    let baseline = read_report(&args.baseline)?;
    let summary = compare(&aware, &baseline).map_err(|e| CliError::input(e.to_string()))?;
    println!("carbon reduction: {:+.6} %", summary.carbon_reduction_pct);
    println!("time increase:    {:+.6} %", summary.time_increase_pct);
    println!("energy reduction: {:+.6} %", summary.energy_reduction_pct);
    let path = write_artifact(&args.out_dir, "compare.json", &summary.to_json())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth_trace(args: &SynthArgs) -> Result<(), CliError> {
    let params = SynthParams {
        mean: args.mean,
        amplitude: args.amplitude,
        period_steps: args.period,
        noise_sigma: args.noise_sigma,
        len: args.length,
        interval_s: args.interval_s,
        start_time: args.start_time,
        seed: args.seed,
    };
    let trace = synth_trace(&params).map_err(|e| CliError::input(e.to_string()))?;
    write_output(&args.out, &trace.serialize(args.format.into()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Trace(TraceCmd::Fetch(args)) => cmd_trace_fetch(args),
        Command::Trace(TraceCmd::Validate(args)) => cmd_trace_validate(args),
        Command::Forecast(ForecastCmd::Eval(args)) => cmd_forecast_eval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::SynthTrace(args) => cmd_synth_trace(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
