//! Single-element antenna gain pattern modelled as a sum of Gaussians in the
//! azimuth angle (degrees).
//!
//! The Gaussian sum is not periodic: `g(0)` and `g(360 - eps)` differ slightly
//! (about 0.006 for [`GaussianMixturePattern::reference`]). Every evaluation wraps
//! the bearing into `[0, 360)` first, so the discontinuity sits at 0°.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod fit;

pub use fit::{fit_pattern, FitOptions, FitReport};

/// Map an angle in degrees into `[0, 360)`.
pub fn wrap_angle(deg: f64) -> Result<f64> {
    if !deg.is_finite() {
        return Err(Error::Domain(format!("angle {deg}")));
    }
    Ok(wrap_deg(deg))
}

/// Unchecked wrap for angles already known to be finite.
#[inline]
pub(crate) fn wrap_deg(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative number rounds up to exactly 360.0
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// One term `a * exp(-(theta - b)^2 / c^2)` of the pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    /// Gain weight `a`, dimensionless.
    pub amplitude: f64,
    /// Centre `b` in degrees.
    pub center_deg: f64,
    /// Width `c` in degrees.
    pub width_deg: f64,
}

impl GaussianComponent {
    pub fn new(amplitude: f64, center_deg: f64, width_deg: f64) -> Result<Self> {
        let comp = Self {
            amplitude,
            center_deg,
            width_deg,
        };
        comp.validate()?;
        Ok(comp)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.center_deg.is_finite() && self.width_deg.is_finite())
        {
            return Err(Error::Domain(format!("gaussian component {self:?}")));
        }
        if self.amplitude < 0.0 {
            return Err(Error::invalid(format!(
                "component amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if self.width_deg <= 0.0 {
            return Err(Error::invalid(format!(
                "component width must be > 0, got {}",
                self.width_deg
            )));
        }
        if !(0.0..360.0).contains(&self.center_deg) {
            return Err(Error::invalid(format!(
                "component centre must lie in [0, 360), got {}",
                self.center_deg
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, wrapped_deg: f64) -> f64 {
        let d = (wrapped_deg - self.center_deg) / self.width_deg;
        self.amplitude * (-d * d).exp()
    }
}

/// Directional gain pattern `g(theta)` as an ordered list of Gaussian terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixturePattern {
    components: Vec<GaussianComponent>,
}

impl GaussianMixturePattern {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("pattern needs at least one component"));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    /// The three-term pattern fitted to the measured spiral-antenna response.
    pub fn reference() -> Self {
        Self {
            components: vec![
                GaussianComponent {
                    amplitude: 0.5255,
                    center_deg: 218.1,
                    width_deg: 51.73,
                },
                GaussianComponent {
                    amplitude: 0.3405,
                    center_deg: 304.8,
                    width_deg: 41.0,
                },
                GaussianComponent {
                    amplitude: 0.6251,
                    center_deg: 156.1,
                    width_deg: 109.1,
                },
            ],
        }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Gain at bearing `theta_deg` (wrapped into `[0, 360)` first).
    pub fn gain(&self, theta_deg: f64) -> Result<f64> {
        Ok(self.gain_wrapped(wrap_angle(theta_deg)?))
    }

    /// Gain at a bearing that is already in `[0, 360)`.
    #[inline]
    pub fn gain_wrapped(&self, wrapped_deg: f64) -> f64 {
        self.components.iter().map(|c| c.eval(wrapped_deg)).sum()
    }

    /// Largest gain on a 0.01° scan; used as the reference for relative fit errors.
    pub fn peak_gain(&self) -> f64 {
        (0..36_000)
            .map(|i| self.gain_wrapped(i as f64 * 0.01))
            .fold(0.0, f64::max)
    }

    /// Flattened `[a1, b1, c1, a2, ...]`.
    pub fn to_params(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| [c.amplitude, c.center_deg, c.width_deg])
            .collect()
    }

    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() % 3 != 0 {
            return Err(Error::invalid(format!(
                "parameter count {} is not a multiple of 3",
                params.len()
            )));
        }
        let comps = params
            .chunks_exact(3)
            .map(|p| GaussianComponent::new(p[0], p[1], p[2]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// Analytic derivative of `g(theta)` with respect to each parameter,
    /// in `to_params` order.
    pub fn parameter_gradient(&self, theta_deg: f64) -> Result<Vec<f64>> {
        let w = wrap_angle(theta_deg)?;
        let p = self.to_params();
        let mut out = vec![0.0; p.len()];
        fit::residual_gradient(&p, w, &mut out);
        Ok(out)
    }

    pub(crate) fn from_params_unchecked(params: &[f64]) -> Self {
        Self {
            components: params
                .chunks_exact(3)
                .map(|p| GaussianComponent {
                    amplitude: p[0],
                    center_deg: p[1],
                    width_deg: p[2],
                })
                .collect(),
        }
    }
}

/// One measured (or generated) point of a gain pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSample {
    pub angle_deg: f64,
    pub gain: f64,
}

impl PatternSample {
    pub fn new(angle_deg: f64, gain: f64) -> Result<Self> {
        if !angle_deg.is_finite() || !gain.is_finite() {
            return Err(Error::Domain(format!("pattern sample ({angle_deg}, {gain})")));
        }
        if gain < 0.0 {
            return Err(Error::invalid(format!("sample gain must be >= 0, got {gain}")));
        }
        Ok(Self { angle_deg, gain })
    }
}

/// Sample `pattern` at `step_deg` spacing over `[0, 360)`.
pub fn sample_pattern(pattern: &GaussianMixturePattern, step_deg: f64) -> Result<Vec<PatternSample>> {
    if !(step_deg > 0.0 && step_deg <= 360.0) {
        return Err(Error::invalid(format!("sampling step {step_deg} out of (0, 360]")));
    }
    let n = (360.0 / step_deg).round() as usize;
    Ok((0..n)
        .map(|i| {
            let angle_deg = i as f64 * step_deg;
            PatternSample {
                angle_deg,
                gain: pattern.gain_wrapped(wrap_deg(angle_deg)),
            }
        })
        .collect())
}
