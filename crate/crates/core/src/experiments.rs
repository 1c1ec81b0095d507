//! Monte Carlo accuracy studies: SNR, manifold amplitude error, and element
//! count sweeps.
//!
//! Each trial draws an arrival direction, optionally perturbs the array gains,
//! synthesizes one pulse block, adds noise, and estimates with the nominal
//! manifold. Trial `i` always uses ChaCha stream `i` of the master seed, so
//! results do not depend on thread scheduling and every setting in a sweep
//! sees the same directions and noise realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{angular_error, DoaEstimator};
use crate::manifold::{angle_grid, perturb, steering_vector, ArrayConfig, ManifoldPerturbation};
use crate::pattern::GaussianMixturePattern;
use crate::signal::{add_awgn, pd_pulse, synthesize_clean, PulseModel, SamplingSpec};

pub const DEFAULT_SEED: u64 = 20_210_417;

/// How true arrival directions are drawn from `[1, 360]` degrees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSampling {
    /// Whole degrees `1, 2, ..., 360`; errors on a 1° grid are integers.
    #[default]
    IntegerDegrees,
    /// Continuous uniform; adds up to half a grid step of quantisation error.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub pattern: GaussianMixturePattern,
    pub array: ArrayConfig,
    pub snr_db: f64,
    /// Half-width of the uniform gain error applied when synthesizing.
    pub manifold_error: f64,
    pub n_trials: usize,
    pub grid_step_deg: f64,
    pub rng_seed: u64,
    /// A trial succeeds when `|error| <= success_threshold_deg`.
    pub success_threshold_deg: f64,
    pub pulse: PulseModel,
    pub sampling: SamplingSpec,
    pub directions: DirectionSampling,
}

impl Default for TrialConfig {
    /// Six-element array, 10 dB, no manifold error, 3600 trials.
    fn default() -> Self {
        Self {
            pattern: GaussianMixturePattern::reference(),
            array: ArrayConfig::uniform(6).expect("six elements"),
            snr_db: 10.0,
            manifold_error: 0.0,
            n_trials: 3600,
            grid_step_deg: 1.0,
            rng_seed: DEFAULT_SEED,
            success_threshold_deg: 2.0,
            pulse: PulseModel::default(),
            sampling: SamplingSpec::default(),
            directions: DirectionSampling::IntegerDegrees,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be >= 1"));
        }
        if !(self.success_threshold_deg.is_finite() && self.success_threshold_deg > 0.0) {
            return Err(Error::invalid("success threshold must be > 0"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr must be finite"));
        }
        ManifoldPerturbation::new(self.manifold_error)?;
        self.pulse.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub true_deg: f64,
    pub estimated_deg: f64,
    pub error_deg: f64,
    pub success: bool,
}

/// Precomputed pieces shared by all trials of one configuration.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: TrialConfig,
    estimator: DoaEstimator,
    pulse: Vec<f64>,
    perturbation: ManifoldPerturbation,
}

impl Simulation {
    pub fn new(cfg: TrialConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = angle_grid(cfg.grid_step_deg)?;
        let estimator = DoaEstimator::new(cfg.pattern.clone(), cfg.array.clone(), grid)?;
        let pulse = pd_pulse(&cfg.pulse, &cfg.sampling)?;
        let perturbation = ManifoldPerturbation::new(cfg.manifold_error)?;
        Ok(Self {
            cfg,
            estimator,
            pulse,
            perturbation,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    fn draw_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.cfg.directions {
            DirectionSampling::IntegerDegrees => rng.random_range(1..=360u32) as f64,
            DirectionSampling::Continuous => rng.random_range(1.0..=360.0),
        }
    }

    /// One trial at a given direction; the perturbation and noise come from `rng`.
    pub fn run_trial_at<R: Rng + ?Sized>(
        &self,
        trial: u64,
        true_deg: f64,
        rng: &mut R,
    ) -> Result<TrialReport> {
        let nominal = steering_vector(&self.cfg.pattern, &self.cfg.array, true_deg)?;
        let actual = perturb(&nominal, self.perturbation, rng);
        let clean = synthesize_clean(&actual, &self.pulse)?;
        let x = add_awgn(&clean, self.cfg.snr_db, rng)?;
        let est = self.estimator.estimate(&x)?;
        let error_deg = angular_error(est.theta_deg, true_deg);
        Ok(TrialReport {
            trial,
            true_deg,
            estimated_deg: est.theta_deg,
            error_deg,
            success: error_deg.abs() <= self.cfg.success_threshold_deg,
        })
    }

    /// Trial `trial` with its own deterministic stream.
    pub fn run_indexed(&self, trial: u64) -> Result<TrialReport> {
        let mut rng = trial_rng(self.cfg.rng_seed, trial);
        let theta = self.draw_direction(&mut rng);
        self.run_trial_at(trial, theta, &mut rng)
    }

    /// All `n_trials`, in trial order.
    pub fn run_all(&self) -> Result<Vec<TrialReport>> {
        (0..self.cfg.n_trials as u64)
            .into_par_iter()
            .map(|i| self.run_indexed(i))
            .collect()
    }
}

/// ChaCha8 generator for one trial: the master seed selects the key, the
/// trial index selects the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn run_trial<R: Rng + ?Sized>(cfg: &TrialConfig, true_deg: f64, rng: &mut R) -> Result<TrialReport> {
    Simulation::new(cfg.clone())?.run_trial_at(0, true_deg, rng)
}

/// Population statistics of signed errors (variance divides by `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub accuracy: f64,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(errors: &[f64], threshold_deg: f64) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::invalid("cannot summarize an empty error list"));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let variance = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let hits = errors.iter().filter(|e| e.abs() <= threshold_deg).count();
    Ok(ErrorStats {
        n: errors.len(),
        accuracy: hits as f64 / n,
        mean,
        variance,
        std: variance.sqrt(),
        min: errors.iter().copied().fold(f64::INFINITY, f64::min),
        max: errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SnrDb,
    ManifoldError,
    Elements,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::SnrDb => "snr_db",
            SweepParameter::ManifoldError => "manifold_error",
            SweepParameter::Elements => "elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: f64,
    pub stats: ErrorStats,
    #[serde(skip)]
    pub trials: Vec<TrialReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, setting: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }
}

fn run_setting(cfg: TrialConfig, setting: f64) -> Result<SweepRow> {
    let threshold = cfg.success_threshold_deg;
    let trials = Simulation::new(cfg)?.run_all()?;
    let errors: Vec<f64> = trials.iter().map(|t| t.error_deg).collect();
    Ok(SweepRow {
        setting,
        stats: summarize(&errors, threshold)?,
        trials,
    })
}

fn sweep<T: Copy>(
    parameter: SweepParameter,
    values: &[T],
    configure: impl Fn(T) -> Result<(TrialConfig, f64)>,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{} list is empty", parameter.name())));
    }
    let rows = values
        .iter()
        .map(|&v| {
            let (cfg, setting) = configure(v)?;
            run_setting(cfg, setting)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { parameter, rows })
}

pub fn run_snr_sweep(template: &TrialConfig, snr_db: &[f64]) -> Result<SweepReport> {
    sweep(SweepParameter::SnrDb, snr_db, |snr| {
        Ok((
            TrialConfig {
                snr_db: snr,
                ..template.clone()
            },
            snr,
        ))
    })
}

/// Data synthesized with the perturbed gains, searched with the nominal ones.
pub fn run_manifold_error_sweep(template: &TrialConfig, half_widths: &[f64]) -> Result<SweepReport> {
    sweep(SweepParameter::ManifoldError, half_widths, |eps| {
        ManifoldPerturbation::new(eps)?;
        Ok((
            TrialConfig {
                manifold_error: eps,
                ..template.clone()
            },
            eps,
        ))
    })
}

/// Uniform circular array rebuilt for each element count.
pub fn run_element_sweep(template: &TrialConfig, counts: &[usize]) -> Result<SweepReport> {
    sweep(SweepParameter::Elements, counts, |n| {
        Ok((
            TrialConfig {
                array: ArrayConfig::uniform(n)?,
                ..template.clone()
            },
            n as f64,
        ))
    })
}

/// Ready-made configurations for the reference studies.
pub mod presets {
    use super::*;

    pub const SNR_LEVELS_DB: [f64; 5] = [10.0, 5.0, 0.0, -5.0, -10.0];
    pub const MANIFOLD_ERRORS: [f64; 4] = [0.025, 0.05, 0.075, 0.1];
    pub const ELEMENT_COUNTS: [usize; 6] = [1, 2, 4, 6, 8, 10];

    /// Six-element SNR study.
    pub fn six_element_snr() -> TrialConfig {
        TrialConfig::default()
    }

    /// Four elements at the six-element pitch (offsets 0, 60, 120, 180).
    pub fn four_element_snr() -> TrialConfig {
        TrialConfig {
            array: ArrayConfig::uniform_subset(4, 6).expect("4 of 6"),
            ..TrialConfig::default()
        }
    }

    /// Manifold-error study at 10 dB.
    pub fn manifold_error() -> TrialConfig {
        TrialConfig::default()
    }

    /// Element-count study: 10 dB with U(-0.05, 0.05) gain error.
    pub fn element_count() -> TrialConfig {
        TrialConfig {
            manifold_error: 0.05,
            ..TrialConfig::default()
        }
    }
}
