//! Synthetic partial-discharge pulses and multichannel snapshot blocks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::GainVector;

/// Damped-oscillation pulse `A (exp(-t/tau_decay) - exp(-t/tau_rise)) cos(2 pi f_c t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseModel {
    /// Volts.
    pub amplitude: f64,
    /// Seconds.
    pub tau_decay: f64,
    /// Seconds; must be shorter than `tau_decay`.
    pub tau_rise: f64,
    pub carrier_hz: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            tau_decay: 1e-9,
            tau_rise: 0.2e-9,
            carrier_hz: 1.25e9,
        }
    }
}

impl PulseModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.amplitude, self.tau_decay, self.tau_rise, self.carrier_hz]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain(format!("pulse model {self:?}")));
        }
        if self.amplitude <= 0.0 || self.carrier_hz <= 0.0 {
            return Err(Error::invalid("pulse amplitude and carrier must be > 0"));
        }
        if self.tau_rise <= 0.0 || self.tau_decay <= self.tau_rise {
            return Err(Error::invalid(format!(
                "need tau_decay > tau_rise > 0, got tau_decay={} tau_rise={}",
                self.tau_decay, self.tau_rise
            )));
        }
        Ok(())
    }

    /// `exp(-t/tau_decay) - exp(-t/tau_rise)` without amplitude or carrier.
    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        (-t / self.tau_decay).exp() - (-t / self.tau_rise).exp()
    }

    /// Time of the envelope maximum.
    pub fn envelope_peak_time(&self) -> f64 {
        let (t1, t2) = (self.tau_decay, self.tau_rise);
        t1 * t2 / (t1 - t2) * (t1 / t2).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
}

impl SamplingSpec {
    /// Snapshot count used by the simulation studies.
    pub const DEFAULT_SNAPSHOTS: usize = 9216;
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 10e9,
            n_samples: Self::DEFAULT_SNAPSHOTS,
        }
    }
}

/// Sampled pulse `s[t]`, `t = 0..n_samples`.
pub fn pd_pulse(model: &PulseModel, spec: &SamplingSpec) -> Result<Vec<f64>> {
    model.validate()?;
    if !(spec.sample_rate_hz.is_finite() && spec.sample_rate_hz > 2.0 * model.carrier_hz) {
        return Err(Error::invalid(format!(
            "sample rate {} Hz does not resolve a {} Hz carrier",
            spec.sample_rate_hz, model.carrier_hz
        )));
    }
    if spec.n_samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let dt = 1.0 / spec.sample_rate_hz;
    let w = 2.0 * std::f64::consts::PI * model.carrier_hz;
    Ok((0..spec.n_samples)
        .map(|i| {
            let t = i as f64 * dt;
            model.amplitude * model.envelope(t) * (w * t).cos()
        })
        .collect())
}

/// `N x T` block of real samples; row `k` is channel `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::invalid("snapshot matrix needs at least one channel"));
        }
        if data.ncols() < 2 {
            return Err(Error::invalid(format!(
                "snapshot matrix needs at least 2 samples, got {}",
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("snapshot matrix contains non-finite samples".into()));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::invalid("channels have different lengths"));
        }
        Self::new(DMatrix::from_fn(n, t, |i, j| rows[i][j]))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Mean square over all entries.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: &self.data * c,
        }
    }

    /// Cyclic roll of the channel order: row `k` of the result is row
    /// `(k - by) mod N` of `self`.
    pub fn rotate_channels(&self, by: usize) -> Self {
        let n = self.n_channels();
        let by = by % n;
        Self {
            data: DMatrix::from_fn(n, self.n_samples(), |i, j| self.data[((i + n - by) % n, j)]),
        }
    }

    /// Columns `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.n_samples() || end < start + 2 {
            return Err(Error::invalid(format!(
                "window {start}..{end} invalid for {} samples",
                self.n_samples()
            )));
        }
        Self::new(self.data.columns(start, end - start).into_owned())
    }
}

/// Noise-free array output: row `k` is `g_k * s`.
pub fn synthesize_clean(gains: &GainVector, pulse: &[f64]) -> Result<SnapshotMatrix> {
    if gains.is_empty() {
        return Err(Error::invalid("gain vector is empty"));
    }
    SnapshotMatrix::new(DMatrix::from_fn(gains.len(), pulse.len(), |k, t| {
        gains.0[k] * pulse[t]
    }))
}

/// Noise standard deviation giving `snr_db` against the mean-square power of `x`.
pub fn noise_sigma(x: &SnapshotMatrix, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("snr {snr_db} dB")));
    }
    let power = x.mean_power();
    if power <= 0.0 {
        return Err(Error::invalid("signal power is zero; SNR undefined"));
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Add white Gaussian noise with one variance for every channel and sample.
pub fn add_awgn<R: Rng + ?Sized>(
    x: &SnapshotMatrix,
    snr_db: f64,
    rng: &mut R,
) -> Result<SnapshotMatrix> {
    let sigma = noise_sigma(x, snr_db)?;
    let mut data = x.data.clone();
    // column-major storage: consecutive draws walk channels within a snapshot
    for v in data.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
    SnapshotMatrix::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{steering_vector, ArrayConfig};
    use crate::pattern::GaussianMixturePattern;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_pulse() -> Vec<f64> {
        pd_pulse(
            &PulseModel::default(),
            &SamplingSpec {
                sample_rate_hz: 10e9,
                n_samples: 512,
            },
        )
        .unwrap()
    }

    #[test]
    fn pulse_starts_at_zero_and_respects_envelope() {
        let m = PulseModel::default();
        let s = default_pulse();
        assert_eq!(s[0], 0.0);
        assert!(s.iter().any(|v| v.abs() > 0.0));
        for (i, v) in s.iter().enumerate() {
            let env = m.amplitude * m.envelope(i as f64 * 1e-10);
            assert!(v.abs() <= env + 1e-15);
        }
    }

    #[test]
    fn envelope_peak_matches_dense_scan() {
        let m = PulseModel::default();
        let dt = 1e-15;
        let (mut best_t, mut best) = (0.0, f64::MIN);
        for i in 0..2_000_000 {
            let t = i as f64 * dt;
            let e = m.envelope(t);
            if e > best {
                best = e;
                best_t = t;
            }
        }
        assert!((best_t - 0.402e-9).abs() < 1e-12, "scan peak {best_t}");
        assert!((m.envelope_peak_time() - best_t).abs() < 2e-15);
    }

    #[test]
    fn envelope_width_above_ten_percent() {
        let m = PulseModel::default();
        let peak = m.envelope(m.envelope_peak_time());
        let dt = 1e-13;
        let above: Vec<f64> = (0..200_000)
            .map(|i| i as f64 * dt)
            .filter(|&t| m.envelope(t) >= 0.1 * peak)
            .collect();
        let width = above.last().unwrap() - above.first().unwrap();
        // dense scan gives 2.914 ns for the default time constants
        assert!((width - 2.914e-9).abs() < 0.002e-9, "width {width}");
    }

    #[test]
    fn pulse_validation() {
        let bad = PulseModel {
            tau_decay: 0.1e-9,
            ..PulseModel::default()
        };
        assert!(pd_pulse(&bad, &SamplingSpec::default()).is_err());
        let slow = SamplingSpec {
            sample_rate_hz: 2e9,
            n_samples: 64,
        };
        assert!(pd_pulse(&PulseModel::default(), &slow).is_err());
        let short = SamplingSpec {
            sample_rate_hz: 10e9,
            n_samples: 1,
        };
        assert!(pd_pulse(&PulseModel::default(), &short).is_err());
    }

    #[test]
    fn outer_product_examples() {
        let x = synthesize_clean(&GainVector(vec![2.0, 1.0]), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(x.data().row(0).iter().copied().collect::<Vec<_>>(), vec![2.0; 3]);
        assert_eq!(x.data().row(1).iter().copied().collect::<Vec<_>>(), vec![1.0; 3]);
        let z = synthesize_clean(&GainVector(vec![1.0, 0.0]), &default_pulse()).unwrap();
        assert!(z.data().row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clean_block_has_rank_one() {
        let p = GaussianMixturePattern::reference();
        let a = ArrayConfig::uniform(6).unwrap();
        let s = &default_pulse()[..40];
        for theta in [0.0, 45.0, 133.0, 271.0] {
            let x = synthesize_clean(&steering_vector(&p, &a, theta).unwrap(), s).unwrap();
            let d = x.data();
            let scale = d.amax().powi(2);
            for i in 0..6 {
                for j in i + 1..6 {
                    for t in 0..s.len() {
                        for u in t + 1..s.len() {
                            let minor = d[(i, t)] * d[(j, u)] - d[(i, u)] * d[(j, t)];
                            assert!(minor.abs() <= 1e-14 * scale);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn awgn_vanishes_at_very_high_snr() {
        let x = synthesize_clean(&GainVector(vec![0.3, 0.9]), &default_pulse()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = add_awgn(&x, 300.0, &mut rng).unwrap();
        let diff = (y.data() - x.data()).norm();
        assert!(diff <= 1e-10 * x.data().norm());
    }

    #[test]
    fn awgn_variance_at_zero_db() {
        let x = SnapshotMatrix::new(DMatrix::from_element(4, 250_000, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = add_awgn(&x, 0.0, &mut rng).unwrap();
        let noise: Vec<f64> = (y.data() - x.data()).iter().copied().collect();
        let n = noise.len() as f64;
        let mean = noise.iter().sum::<f64>() / n;
        let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() <= 0.01, "var {var}");
    }

    #[test]
    fn awgn_is_uncorrelated_with_signal_and_channel_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|k| {
                (0..100_000)
                    .map(|t| ((t as f64) * 0.01 + k as f64).sin() * (k + 1) as f64)
                    .collect()
            })
            .collect();
        let x = SnapshotMatrix::from_rows(&rows).unwrap();
        let y = add_awgn(&x, 3.0, &mut rng).unwrap();
        let noise = y.data() - x.data();
        let xs: Vec<f64> = x.data().iter().copied().collect();
        let ns: Vec<f64> = noise.iter().copied().collect();
        let n = xs.len() as f64;
        let (mx, mn) = (xs.iter().sum::<f64>() / n, ns.iter().sum::<f64>() / n);
        let cov: f64 = xs.iter().zip(&ns).map(|(a, b)| (a - mx) * (b - mn)).sum::<f64>() / n;
        let vx = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
        let vn = ns.iter().map(|b| (b - mn).powi(2)).sum::<f64>() / n;
        assert!((cov / (vx * vn).sqrt()).abs() < 0.01);

        let per_channel: Vec<f64> = (0..10)
            .map(|k| noise.row(k).iter().map(|v| v * v).sum::<f64>() / 100_000.0)
            .collect();
        let avg = per_channel.iter().sum::<f64>() / 10.0;
        assert!(per_channel.iter().all(|v| (v / avg - 1.0).abs() < 0.05));
    }

    #[test]
    fn awgn_rejects_silent_input() {
        let x = SnapshotMatrix::new(DMatrix::zeros(3, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(add_awgn(&x, 10.0, &mut rng).is_err());
    }

    #[test]
    fn low_snr_buries_weak_channels() {
        // at -10 dB the weakest channels of the six-element array sit below the noise floor
        let p = GaussianMixturePattern::reference();
        let a = ArrayConfig::uniform(6).unwrap();
        let g = steering_vector(&p, &a, 0.0).unwrap();
        let x = synthesize_clean(&g, &default_pulse()).unwrap();
        let sigma = noise_sigma(&x, -10.0).unwrap();
        let peak = |k: usize| x.data().row(k).amax();
        let buried = (0..6).filter(|&k| peak(k) < 2.0 * sigma).count();
        assert!(buried >= 2, "buried {buried}");
    }

    #[test]
    fn window_and_rotation() {
        let x = SnapshotMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = x.rotate_channels(1);
        assert_eq!(r.data()[(0, 0)], 4.0);
        assert_eq!(r.data()[(1, 2)], 3.0);
        let y = SnapshotMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(y.rotate_channels(1).data()[(0, 0)], 3.0);
        assert_eq!(y.rotate_channels(4), y.rotate_channels(1));
        let w = x.window(1, 3).unwrap();
        assert_eq!(w.n_samples(), 2);
        assert!(x.window(2, 3).is_err());
        assert!(SnapshotMatrix::from_rows(&[vec![1.0]]).is_err());
    }
}
