//! Linear-phase windowed-sinc band-pass FIR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Odd, at least 11.
    pub taps: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_hz: 1.0e9,
            high_hz: 2.0e9,
            taps: 301,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.taps < 11 || self.taps % 2 == 0 {
            return Err(Error::invalid(format!("tap count must be odd and >= 11, got {}", self.taps)));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(Error::invalid(format!(
                "passband [{}, {}] Hz infeasible at sample rate {} Hz",
                self.low_hz, self.high_hz, sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Hamming-windowed difference of two low-pass sinc kernels.
    pub fn kernel(&self, sample_rate_hz: f64) -> Result<Vec<f64>> {
        self.validate(sample_rate_hz)?;
        let lo = self.low_hz / sample_rate_hz;
        let hi = self.high_hz / sample_rate_hz;
        let m = self.taps as f64 - 1.0;
        let half = m / 2.0;
        Ok((0..self.taps)
            .map(|i| {
                let n = i as f64 - half;
                let ideal = 2.0 * hi * sinc(2.0 * hi * n) - 2.0 * lo * sinc(2.0 * lo * n);
                let window = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / m).cos();
                ideal * window
            })
            .collect())
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Filter one channel with a symmetric kernel, compensating the
/// `(taps - 1) / 2` sample group delay. Samples outside the input count as zero.
pub fn filter_same(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let delay = (kernel.len() - 1) / 2;
    let len = x.len() as isize;
    (0..x.len())
        .map(|n| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(k, h)| {
                    let idx = n as isize + delay as isize - k as isize;
                    (0..len).contains(&idx).then(|| h * x[idx as usize])
                })
                .sum()
        })
        .collect()
}

/// Magnitude of the kernel's frequency response at `freq_hz`.
pub fn magnitude_response(kernel: &[f64], freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
    let (re, im) = kernel.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
        let ph = w * n as f64;
        (re + h * ph.cos(), im - h * ph.sin())
    });
    (re * re + im * im).sqrt()
}
