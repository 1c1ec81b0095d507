use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dirmusic::config::RunConfig;
use dirmusic::error::Error;
use dirmusic::estimator::DoaEstimator;
use dirmusic::experiments::{
    presets, run_element_sweep, run_manifold_error_sweep, run_snr_sweep, summarize, Simulation,
    SweepReport, TrialConfig,
};
use dirmusic::io;
use dirmusic::manifold::{angle_grid, manifold_matrix};
use dirmusic::pattern::{fit_pattern, sample_pattern, FitReport, GaussianMixturePattern, PatternSample};
use dirmusic::pipeline::{
    process_recording, synthesize_recording, ProcessOptions, Recording, SyntheticRecordingSpec,
    ToneInterference,
};
use dirmusic::signal::SamplingSpec;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_NO_PULSE: u8 = 5;
const EXIT_INVALID: u8 = 6;

/// Direction finding with an antenna-gain array manifold.
#[derive(Parser, Debug)]
#[command(name = "dirmusic", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration (`schema_version = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Search grid step in degrees.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Uniform circular array element count.
    #[arg(long, global = true)]
    elements: Option<usize>,
    /// Output file (or directory for simulate and sweeps).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per setting.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Success threshold on |error| in degrees (inclusive).
    #[arg(long, global = true)]
    threshold_deg: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a Gaussian-mixture pattern to `angle_deg,gain` samples.
    FitPattern {
        /// Samples CSV; omit with --demo.
        samples: Option<PathBuf>,
        /// Number of Gaussian components.
        #[arg(short = 'k', long, value_parser = clap::value_parser!(u64).range(1..))]
        components: Option<u64>,
        /// Use built-in samples: the reference pattern at 1° with U(-0.01, 0.01) noise.
        #[arg(long, conflicts_with = "samples")]
        demo: bool,
    },
    /// Dump steering vectors on the search grid as CSV.
    Manifold,
    /// Run Monte Carlo trials at one setting.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        manifold_error: Option<f64>,
    },
    /// Accuracy versus SNR.
    SweepSnr {
        /// Comma-separated SNR levels in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
    /// Accuracy versus manifold gain-error half-width.
    SweepError {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Accuracy versus element count.
    SweepElements {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Estimate the arrival direction from a waveform CSV.
    Estimate {
        recording: PathBuf,
        /// Also write the spatial spectrum as `angle_deg,p_mu` CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Write a synthetic waveform CSV for the configured array.
    Synthesize {
        #[arg(long, allow_hyphen_values = true)]
        theta_deg: f64,
        /// Omit for a noise-free record.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long, default_value_t = 600)]
        pulse_start: usize,
        /// Add a tone at this frequency.
        #[arg(long)]
        tone_hz: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tone_deg: f64,
        /// Tone power relative to the pulse.
        #[arg(long, default_value_t = 1.0)]
        tone_ratio: f64,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Io { .. }) => EXIT_IO,
            CliError::Core(Error::Parse { .. }) => EXIT_PARSE,
            CliError::Core(Error::NoPulseFound { .. }) => EXIT_NO_PULSE,
            CliError::Core(_) => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dirmusic: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(),
    };
    apply_flags(&mut cfg, &cli.common);
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::FitPattern {
            samples,
            components,
            demo,
        } => cmd_fit_pattern(&cfg, samples.as_deref(), components, demo, out),
        Command::Manifold => cmd_manifold(&cfg, out),
        Command::Simulate {
            snr_db,
            manifold_error,
        } => {
            cfg.simulate.snr_db = snr_db.or(cfg.simulate.snr_db);
            cfg.simulate.manifold_error = manifold_error.or(cfg.simulate.manifold_error);
            cmd_simulate(&cfg, out)
        }
        Command::SweepSnr { values } => {
            let levels = list(values, &cfg.sweep.snr_db, &presets::SNR_LEVELS_DB, "snr_db")?;
            let template = trial_config(&cfg, 0.0)?;
            write_sweep(&run_snr_sweep(&template, &levels)?, &template, out)
        }
        Command::SweepError { values } => {
            let eps = list(values, &cfg.sweep.manifold_error, &presets::MANIFOLD_ERRORS, "manifold_error")?;
            let template = trial_config(&cfg, 0.0)?;
            write_sweep(&run_manifold_error_sweep(&template, &eps)?, &template, out)
        }
        Command::SweepElements { values } => {
            let counts = list(values, &cfg.sweep.elements, &presets::ELEMENT_COUNTS, "elements")?;
            let default_eps = presets::element_count().manifold_error;
            let template = trial_config(&cfg, default_eps)?;
            write_sweep(&run_element_sweep(&template, &counts)?, &template, out)
        }
        Command::Estimate {
            recording,
            spectrum,
        } => cmd_estimate(&cfg, &recording, spectrum.as_deref(), out),
        Command::Synthesize {
            theta_deg,
            snr_db,
            samples,
            pulse_start,
            tone_hz,
            tone_deg,
            tone_ratio,
        } => {
            let mut spec = SyntheticRecordingSpec::new(cfg.resolve_pattern()?, cfg.resolve_array()?, theta_deg);
            spec.snr_db = snr_db;
            spec.n_samples = samples;
            spec.pulse_start = pulse_start;
            spec.pulse = cfg.simulate.pulse.unwrap_or(spec.pulse);
            spec.sample_rate_hz = cfg.simulate.sample_rate_hz.unwrap_or(spec.sample_rate_hz);
            spec.interference = tone_hz.map(|freq_hz| ToneInterference {
                freq_hz,
                direction_deg: tone_deg,
                power_ratio: tone_ratio,
            });
            let out = out.ok_or_else(|| CliError::Usage("synthesize needs --out".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
            io::write_waveform(out, &synthesize_recording(&spec, &mut rng)?)?;
            Ok(())
        }
    }
}

fn apply_flags(cfg: &mut RunConfig, c: &Common) {
    cfg.seed = c.seed.or(cfg.seed);
    cfg.grid_step_deg = c.grid_step.or(cfg.grid_step_deg);
    cfg.trials = c.trials.or(cfg.trials);
    cfg.threshold_deg = c.threshold_deg.or(cfg.threshold_deg);
    if let Some(n) = c.elements {
        cfg.array.elements = Some(n);
        cfg.array.offsets_deg = None;
    }
}

fn list<T: Clone>(flag: Option<Vec<T>>, file: &Option<Vec<T>>, default: &[T], name: &str) -> CliResult<Vec<T>> {
    let values = flag.or_else(|| file.clone()).unwrap_or_else(|| default.to_vec());
    if values.is_empty() {
        return Err(CliError::Usage(format!("sweep list `{name}` is empty")));
    }
    Ok(values)
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct FitSummary<'a> {
    components: usize,
    n_samples: usize,
    converged: bool,
    iterations: usize,
    initial_cost: f64,
    final_cost: f64,
    rmse: f64,
    pattern: &'a GaussianMixturePattern,
}

fn demo_samples(seed: u64) -> Vec<PatternSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pattern(&GaussianMixturePattern::reference(), 1.0)
        .expect("1 degree step")
        .into_iter()
        .map(|s| PatternSample {
            gain: (s.gain + rng.random_range(-0.01..=0.01)).max(0.0),
            ..s
        })
        .collect()
}

fn cmd_fit_pattern(
    cfg: &RunConfig,
    samples: Option<&Path>,
    k: Option<u64>,
    demo: bool,
    out: Option<&Path>,
) -> CliResult<()> {
    let data = match (samples, demo) {
        (Some(path), _) => io::read_samples(path)?,
        (None, true) => demo_samples(cfg.seed()),
        (None, false) => return Err(CliError::Usage("fit-pattern needs a samples CSV or --demo".into())),
    };
    let k = k.map(|k| k as usize).or(cfg.fit.components).unwrap_or(3);
    if k == 0 {
        return Err(CliError::Usage("component count must be >= 1".into()));
    }
    let report: FitReport = fit_pattern(&data, k, &cfg.fit_options())?;
    if let Some(path) = out {
        io::write_pattern(path, &report.pattern)?;
    }
    print!(
        "{}",
        json(&FitSummary {
            components: k,
            n_samples: data.len(),
            converged: report.converged,
            iterations: report.iterations,
            initial_cost: report.initial_cost,
            final_cost: report.final_cost,
            rmse: report.rmse,
            pattern: &report.pattern,
        })
    );
    Ok(())
}

fn cmd_manifold(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let pattern = cfg.resolve_pattern()?;
    let array = cfg.resolve_array()?;
    let grid = angle_grid(cfg.grid_step_deg())?;
    let a = manifold_matrix(&pattern, &array, &grid)?;
    let mut text = String::from("angle_deg");
    for k in 1..=array.n_elements() {
        text.push_str(&format!(",g{k}"));
    }
    text.push('\n');
    for (j, theta) in grid.iter().enumerate() {
        text.push_str(&theta.to_string());
        for k in 0..array.n_elements() {
            text.push_str(&format!(",{}", a[(k, j)]));
        }
        text.push('\n');
    }
    emit(&text, out)
}

fn trial_config(cfg: &RunConfig, default_error: f64) -> CliResult<TrialConfig> {
    let d = TrialConfig::default();
    let tc = TrialConfig {
        pattern: cfg.resolve_pattern()?,
        array: cfg.resolve_array()?,
        snr_db: cfg.simulate.snr_db.unwrap_or(d.snr_db),
        manifold_error: cfg.simulate.manifold_error.unwrap_or(default_error),
        n_trials: cfg.trials.unwrap_or(d.n_trials),
        grid_step_deg: cfg.grid_step_deg(),
        rng_seed: cfg.seed(),
        success_threshold_deg: cfg.threshold_deg(),
        pulse: cfg.simulate.pulse.unwrap_or(d.pulse),
        sampling: SamplingSpec {
            sample_rate_hz: cfg.simulate.sample_rate_hz.unwrap_or(d.sampling.sample_rate_hz),
            n_samples: cfg.simulate.snapshots.unwrap_or(d.sampling.n_samples),
        },
        directions: cfg.simulate.directions.unwrap_or(d.directions),
    };
    if tc.n_trials == 0 {
        return Err(CliError::Usage("trial count must be >= 1".into()));
    }
    tc.validate()?;
    Ok(tc)
}

fn output_dir(out: Option<&Path>) -> CliResult<Option<&Path>> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    Ok(out)
}

fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let tc = trial_config(cfg, 0.0)?;
    let trials = Simulation::new(tc.clone())?.run_all()?;
    let errors: Vec<f64> = trials.iter().map(|t| t.error_deg).collect();
    let stats = summarize(&errors, tc.success_threshold_deg)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a TrialConfig,
        stats: dirmusic::experiments::ErrorStats,
    }
    let summary = json(&Summary { config: &tc, stats });
    if let Some(dir) = output_dir(out)? {
        io::write_trials(&dir.join("trials.csv"), &trials)?;
        io::write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    }
    print!("{summary}");
    Ok(())
}

fn write_sweep(report: &SweepReport, template: &TrialConfig, out: Option<&Path>) -> CliResult<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        template: &'a TrialConfig,
        #[serde(flatten)]
        report: &'a SweepReport,
    }
    let summary = json(&Summary { template, report });
    if let Some(dir) = output_dir(out)? {
        io::write_sweep(&dir.join("sweep.csv"), report)?;
        io::write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    }
    print!("{}", String::from_utf8(io::sweep_to_csv(report)).expect("utf8"));
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord {
    theta_hat_deg: f64,
    peak_value: f64,
    grid_step_deg: f64,
    n_elements: usize,
    snapshots_used: usize,
    window_start_s: f64,
    window_end_s: f64,
    detection_channel: usize,
    filter_band_hz: [f64; 2],
    filter_taps: usize,
    sample_rate_hz: f64,
}

fn cmd_estimate(cfg: &RunConfig, path: &Path, spectrum: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let array = cfg.resolve_array()?;
    let mut rec = io::read_waveform(path)?;
    if let Some(map) = &cfg.estimate.channel_map {
        rec = Recording::with_channel_map(rec.sample_rate_hz(), rec.channels().clone(), map.clone())?;
    }
    let estimator = DoaEstimator::new(cfg.resolve_pattern()?, array, angle_grid(cfg.grid_step_deg())?)?;
    let opts = ProcessOptions {
        filter: cfg.filter.unwrap_or_default(),
        detect: cfg.detect.unwrap_or_default(),
        with_spectrum: spectrum.is_some(),
    };
    let result = process_recording(&rec, &opts, &estimator)?;
    if let (Some(spath), Some(s)) = (spectrum, &result.estimate.spectrum) {
        io::write_spectrum(spath, s)?;
    }
    let record = EstimateRecord {
        theta_hat_deg: result.estimate.theta_deg,
        peak_value: result.estimate.peak_value,
        grid_step_deg: cfg.grid_step_deg(),
        n_elements: estimator.array().n_elements(),
        snapshots_used: result.window.len(),
        window_start_s: result.window_start_s(),
        window_end_s: result.window_end_s(),
        detection_channel: result.window.detection_channel,
        filter_band_hz: [opts.filter.low_hz, opts.filter.high_hz],
        filter_taps: opts.filter.taps,
        sample_rate_hz: result.sample_rate_hz,
    };
    emit(&json(&record), out)
}
