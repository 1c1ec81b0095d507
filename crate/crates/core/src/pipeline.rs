//! Offline processing of recorded multichannel pulse waveforms: band-pass,
//! pulse interception, bipolar normalisation, then direction finding.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{DoaEstimate, DoaEstimator};
use crate::filter::{filter_same, FilterSpec};
use crate::manifold::{steering_vector, ArrayConfig};
use crate::pattern::GaussianMixturePattern;
use crate::signal::{noise_sigma, pd_pulse, PulseModel, SamplingSpec, SnapshotMatrix};

/// Sampled multichannel record.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sample_rate_hz: f64,
    channels: DMatrix<f64>,
    /// `channel_map[i]` is the array element recorded on channel `i`.
    channel_map: Vec<usize>,
}

impl Recording {
    pub fn new(sample_rate_hz: f64, channels: DMatrix<f64>) -> Result<Self> {
        let n = channels.nrows();
        Self::with_channel_map(sample_rate_hz, channels, (0..n).collect())
    }

    pub fn with_channel_map(
        sample_rate_hz: f64,
        channels: DMatrix<f64>,
        channel_map: Vec<usize>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!("sample rate {sample_rate_hz} Hz")));
        }
        if channels.nrows() == 0 || channels.ncols() < 2 {
            return Err(Error::invalid(format!(
                "recording needs channels and at least 2 samples, got {:?}",
                channels.shape()
            )));
        }
        if channels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("recording contains non-finite samples".into()));
        }
        let mut seen = vec![false; channels.nrows()];
        if channel_map.len() != channels.nrows() {
            return Err(Error::invalid("channel map length differs from channel count"));
        }
        for &e in &channel_map {
            if e >= seen.len() || seen[e] {
                return Err(Error::invalid(format!("channel map {channel_map:?} is not a permutation")));
            }
            seen[e] = true;
        }
        Ok(Self {
            sample_rate_hz,
            channels,
            channel_map,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &DMatrix<f64> {
        &self.channels
    }

    pub fn channel_map(&self) -> &[usize] {
        &self.channel_map
    }

    pub fn n_channels(&self) -> usize {
        self.channels.nrows()
    }

    pub fn len(&self) -> usize {
        self.channels.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.ncols() == 0
    }

    /// Rows reordered so row `k` holds element `k`.
    pub fn element_ordered(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_channels(), self.len());
        for (ch, &elem) in self.channel_map.iter().enumerate() {
            out.set_row(elem, &self.channels.row(ch));
        }
        out
    }
}

/// Filter every channel with the same kernel; output length equals input length.
pub fn bandpass(rec: &Recording, spec: &FilterSpec) -> Result<Recording> {
    let kernel = spec.kernel(rec.sample_rate_hz)?;
    if rec.len() < kernel.len() {
        return Err(Error::invalid(format!(
            "recording of {} samples is shorter than the {}-tap filter",
            rec.len(),
            kernel.len()
        )));
    }
    let mut out = DMatrix::zeros(rec.n_channels(), rec.len());
    for i in 0..rec.n_channels() {
        let row: Vec<f64> = rec.channels.row(i).iter().copied().collect();
        let y = filter_same(&row, &kernel);
        for (j, v) in y.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(Recording {
        sample_rate_hz: rec.sample_rate_hz,
        channels: out,
        channel_map: rec.channel_map.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectOptions {
    /// Threshold in units of the leading-segment noise standard deviation.
    pub k_sigma: f64,
    pub pre_margin_s: f64,
    pub post_margin_s: f64,
    /// Leading fraction of the record assumed pulse-free.
    pub noise_fraction: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            k_sigma: 5.0,
            pre_margin_s: 5e-9,
            post_margin_s: 20e-9,
            noise_fraction: 0.1,
        }
    }
}

/// Samples `start..end` (end exclusive) around the detected pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseWindow {
    pub start: usize,
    pub end: usize,
    pub peak_index: usize,
    /// Recording channel (not element) holding the peak.
    pub detection_channel: usize,
    pub threshold: f64,
}

impl PulseWindow {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Locate the strongest pulse across all channels.
pub fn detect_pulse(rec: &Recording, opts: &DetectOptions) -> Result<PulseWindow> {
    if !(opts.k_sigma.is_finite() && opts.k_sigma > 0.0) {
        return Err(Error::invalid("k_sigma must be > 0"));
    }
    if !(opts.noise_fraction > 0.0 && opts.noise_fraction < 1.0) {
        return Err(Error::invalid("noise fraction must lie in (0, 1)"));
    }
    if !(opts.pre_margin_s >= 0.0 && opts.post_margin_s >= 0.0) {
        return Err(Error::invalid("window margins must be >= 0"));
    }
    let (mut ch, mut idx, mut peak) = (0, 0, -1.0);
    for i in 0..rec.n_channels() {
        for (j, v) in rec.channels.row(i).iter().enumerate() {
            if v.abs() > peak {
                (ch, idx, peak) = (i, j, v.abs());
            }
        }
    }

    let n_noise = ((rec.len() as f64 * opts.noise_fraction) as usize).max(2);
    let lead = rec.channels.row(ch).columns(0, n_noise).into_owned();
    let mean = lead.mean();
    let sigma = (lead.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_noise as f64).sqrt();
    let threshold = opts.k_sigma * sigma;
    if peak <= threshold || peak == 0.0 {
        return Err(Error::NoPulseFound { peak, threshold });
    }

    let pre = (opts.pre_margin_s * rec.sample_rate_hz).round() as usize;
    let post = (opts.post_margin_s * rec.sample_rate_hz).round() as usize;
    let start = idx.saturating_sub(pre);
    let mut end = (idx + post + 1).min(rec.len());
    if end < start + 2 {
        end = (start + 2).min(rec.len());
    }
    Ok(PulseWindow {
        start,
        end,
        peak_index: idx,
        detection_channel: ch,
        threshold,
    })
}

/// Divide every entry by the single largest magnitude across all channels.
pub fn normalize_bipolar(x: &SnapshotMatrix) -> Result<SnapshotMatrix> {
    let m = x.data().amax();
    if m == 0.0 {
        return Err(Error::invalid("cannot normalise an all-zero block"));
    }
    // divide rather than multiply by 1/m so the peak maps to exactly +-1
    SnapshotMatrix::new(x.data().map(|v| v / m))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProcessOptions {
    pub filter: FilterSpec,
    pub detect: DetectOptions,
    /// Keep the full spatial spectrum in the estimate.
    #[serde(default)]
    pub with_spectrum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedRecording {
    pub estimate: DoaEstimate,
    pub window: PulseWindow,
    pub filter: FilterSpec,
    pub sample_rate_hz: f64,
}

impl ProcessedRecording {
    pub fn window_start_s(&self) -> f64 {
        self.window.start as f64 / self.sample_rate_hz
    }

    pub fn window_end_s(&self) -> f64 {
        self.window.end as f64 / self.sample_rate_hz
    }
}

/// Band-pass, intercept the pulse, normalise, and estimate the direction.
pub fn process_recording(
    rec: &Recording,
    opts: &ProcessOptions,
    estimator: &DoaEstimator,
) -> Result<ProcessedRecording> {
    if rec.n_channels() != estimator.array().n_elements() {
        return Err(Error::invalid(format!(
            "recording has {} channels, array has {} elements",
            rec.n_channels(),
            estimator.array().n_elements()
        )));
    }
    let filtered = bandpass(rec, &opts.filter)?;
    let window = detect_pulse(&filtered, &opts.detect)?;
    let block = SnapshotMatrix::new(filtered.element_ordered())?.window(window.start, window.end)?;
    let normalized = normalize_bipolar(&block)?;
    let estimate = if opts.with_spectrum {
        estimator.estimate_with_spectrum(&normalized)?
    } else {
        estimator.estimate(&normalized)?
    };
    Ok(ProcessedRecording {
        estimate,
        window,
        filter: opts.filter,
        sample_rate_hz: rec.sample_rate_hz,
    })
}

/// Narrowband interferer added to a synthetic recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneInterference {
    pub freq_hz: f64,
    /// Arrival direction; the tone is weighted by the array gains there.
    pub direction_deg: f64,
    /// Tone mean-square power relative to the clean pulse block.
    pub power_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecordingSpec {
    pub pattern: GaussianMixturePattern,
    pub array: ArrayConfig,
    pub theta_deg: f64,
    /// `None` for a noise-free record.
    pub snr_db: Option<f64>,
    pub pulse: PulseModel,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub pulse_start: usize,
    pub interference: Option<ToneInterference>,
}

impl SyntheticRecordingSpec {
    /// 4096 samples at 10 GS/s with the pulse starting at 60 ns.
    pub fn new(pattern: GaussianMixturePattern, array: ArrayConfig, theta_deg: f64) -> Self {
        Self {
            pattern,
            array,
            theta_deg,
            snr_db: None,
            pulse: PulseModel::default(),
            sample_rate_hz: 10e9,
            n_samples: 4096,
            pulse_start: 600,
            interference: None,
        }
    }
}

/// Build a record: pulse weighted by the array gains, optional tone, then
/// white noise at the requested SNR (referenced to the clean pulse block).
pub fn synthesize_recording<R: Rng + ?Sized>(
    spec: &SyntheticRecordingSpec,
    rng: &mut R,
) -> Result<Recording> {
    if spec.pulse_start + 2 > spec.n_samples {
        return Err(Error::invalid("pulse starts after the end of the record"));
    }
    let pulse = pd_pulse(
        &spec.pulse,
        &SamplingSpec {
            sample_rate_hz: spec.sample_rate_hz,
            n_samples: spec.n_samples - spec.pulse_start,
        },
    )?;
    let g = steering_vector(&spec.pattern, &spec.array, spec.theta_deg)?;
    let n = g.len();
    let mut data = DMatrix::<f64>::zeros(n, spec.n_samples);
    for k in 0..n {
        for (t, s) in pulse.iter().enumerate() {
            data[(k, spec.pulse_start + t)] = g.0[k] * s;
        }
    }
    let clean = SnapshotMatrix::new(data.clone())?;

    if let Some(tone) = spec.interference {
        if !(tone.freq_hz > 0.0 && tone.power_ratio >= 0.0) {
            return Err(Error::invalid("tone frequency must be > 0 and power ratio >= 0"));
        }
        let gi = steering_vector(&spec.pattern, &spec.array, tone.direction_deg)?;
        let mean_g2 = gi.0.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let amp = (2.0 * tone.power_ratio * clean.mean_power() / mean_g2).sqrt();
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let w = std::f64::consts::TAU * tone.freq_hz / spec.sample_rate_hz;
        for t in 0..spec.n_samples {
            let c = amp * (w * t as f64 + phase).cos();
            for k in 0..n {
                data[(k, t)] += gi.0[k] * c;
            }
        }
    }

    if let Some(snr) = spec.snr_db {
        let sigma = noise_sigma(&clean, snr)?;
        for v in data.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    Recording::new(spec.sample_rate_hz, data)
}
