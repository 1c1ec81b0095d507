//! Gain-based array manifold for circular arrays of directional elements.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{wrap_angle, wrap_deg, GaussianMixturePattern};

/// Element boresight offsets of a circular array, in degrees.
///
/// Element `k` sees the incoming wave at `theta + offset_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    offsets_deg: Vec<f64>,
}

impl ArrayConfig {
    /// `n` elements with offsets `360 * k / n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        Ok(Self {
            offsets_deg: (0..n).map(|k| 360.0 * k as f64 / n as f64).collect(),
        })
    }

    /// Explicit offsets; must be strictly increasing inside `[0, 360)`.
    pub fn with_offsets(offsets_deg: Vec<f64>) -> Result<Self> {
        if offsets_deg.is_empty() {
            return Err(Error::invalid("array needs at least one element"));
        }
        if let Some(bad) = offsets_deg
            .iter()
            .find(|o| !o.is_finite() || !(0.0..360.0).contains(*o))
        {
            return Err(Error::invalid(format!("element offset {bad} outside [0, 360)")));
        }
        if offsets_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("element offsets must be strictly increasing"));
        }
        Ok(Self { offsets_deg })
    }

    /// The first `n` elements of a uniform `spacing_of`-element array, e.g.
    /// four elements at 60° pitch.
    pub fn uniform_subset(n: usize, spacing_of: usize) -> Result<Self> {
        if n > spacing_of {
            return Err(Error::invalid(format!(
                "cannot take {n} elements from a {spacing_of}-element array"
            )));
        }
        let mut full = Self::uniform(spacing_of)?;
        full.offsets_deg.truncate(n);
        Ok(full)
    }

    pub fn n_elements(&self) -> usize {
        self.offsets_deg.len()
    }

    pub fn offsets_deg(&self) -> &[f64] {
        &self.offsets_deg
    }

    /// True when the offsets are exactly `360 * k / n`.
    pub fn is_uniform(&self) -> bool {
        let n = self.offsets_deg.len() as f64;
        self.offsets_deg
            .iter()
            .enumerate()
            .all(|(k, &o)| o == 360.0 * k as f64 / n)
    }
}

/// Per-element gains `[g_1(theta), ..., g_N(theta)]` for one arrival angle.
///
/// Nominal vectors are nonnegative; perturbed ones may carry negative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainVector(pub Vec<f64>);

impl GainVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Half-width of the zero-mean uniform amplitude error added to each channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPerturbation {
    half_width: f64,
}

impl ManifoldPerturbation {
    pub fn new(half_width: f64) -> Result<Self> {
        if !half_width.is_finite() || half_width < 0.0 {
            return Err(Error::invalid(format!(
                "perturbation half-width must be finite and >= 0, got {half_width}"
            )));
        }
        Ok(Self { half_width })
    }

    pub fn none() -> Self {
        Self { half_width: 0.0 }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

pub fn steering_vector(
    pattern: &GaussianMixturePattern,
    array: &ArrayConfig,
    theta_deg: f64,
) -> Result<GainVector> {
    let theta = wrap_angle(theta_deg)?;
    Ok(GainVector(steering_gains(pattern, array, theta)))
}

#[inline]
fn steering_gains(pattern: &GaussianMixturePattern, array: &ArrayConfig, theta: f64) -> Vec<f64> {
    array
        .offsets_deg
        .iter()
        .map(|off| pattern.gain_wrapped(wrap_deg(theta + off)))
        .collect()
}

/// Add an independent `U(-eps, eps)` draw to every entry. Results are not
/// clamped at zero.
pub fn perturb<R: Rng + ?Sized>(
    gains: &GainVector,
    pert: ManifoldPerturbation,
    rng: &mut R,
) -> GainVector {
    if pert.half_width == 0.0 {
        return gains.clone();
    }
    let dist = Uniform::new_inclusive(-pert.half_width, pert.half_width)
        .expect("half-width validated finite and positive");
    GainVector(gains.0.iter().map(|g| g + dist.sample(rng)).collect())
}

/// Steering vectors for every grid angle, one per column (`N x grid.len()`).
pub fn manifold_matrix(
    pattern: &GaussianMixturePattern,
    array: &ArrayConfig,
    grid_deg: &[f64],
) -> Result<DMatrix<f64>> {
    if grid_deg.is_empty() {
        return Err(Error::invalid("search grid is empty"));
    }
    let n = array.n_elements();
    let mut m = DMatrix::zeros(n, grid_deg.len());
    for (j, &theta) in grid_deg.iter().enumerate() {
        let theta = wrap_angle(theta)?;
        for (k, off) in array.offsets_deg.iter().enumerate() {
            m[(k, j)] = pattern.gain_wrapped(wrap_deg(theta + off));
        }
    }
    Ok(m)
}

/// Angles `0, step, 2*step, ...` strictly below 360.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg.is_finite() && step_deg > 0.0 && step_deg <= 360.0) {
        return Err(Error::invalid(format!("grid step {step_deg} out of (0, 360]")));
    }
    let n = (360.0 / step_deg - 1e-9).ceil() as usize;
    Ok((0..n).map(|i| i as f64 * step_deg).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> GaussianMixturePattern {
        GaussianMixturePattern::reference()
    }

    #[test]
    fn uniform_offsets() {
        let a = ArrayConfig::uniform(6).unwrap();
        assert_eq!(a.offsets_deg(), &[0.0, 60.0, 120.0, 180.0, 240.0, 300.0]);
        assert!(a.is_uniform());
        let sub = ArrayConfig::uniform_subset(4, 6).unwrap();
        assert_eq!(sub.offsets_deg(), &[0.0, 60.0, 120.0, 180.0]);
        assert!(!sub.is_uniform());
        assert!(ArrayConfig::uniform(0).is_err());
        assert!(ArrayConfig::with_offsets(vec![0.0, 0.0]).is_err());
        assert!(ArrayConfig::with_offsets(vec![0.0, 360.0]).is_err());
        assert!(ArrayConfig::uniform_subset(7, 6).is_err());
    }

    #[test]
    fn single_element_is_the_pattern() {
        let a = ArrayConfig::uniform(1).unwrap();
        for theta in [0.0, 37.5, 200.0, 359.0] {
            let g = steering_vector(&reference(), &a, theta).unwrap();
            assert_eq!(g.0, vec![reference().gain(theta).unwrap()]);
        }
    }

    #[test]
    fn six_element_at_zero_matches_pattern_samples() {
        let a = ArrayConfig::uniform(6).unwrap();
        let g = steering_vector(&reference(), &a, 0.0).unwrap();
        let expected: Vec<f64> = [0.0, 60.0, 120.0, 180.0, 240.0, 300.0]
            .iter()
            .map(|&t| reference().gain(t).unwrap())
            .collect();
        assert_eq!(g.0, expected);
        // independent evaluation of the three-term sum
        let hand = [
            0.080_699_345_520_042_6,
            0.287_777_348_641_448_6,
            0.574_685_115_673_151_3,
            0.901_325_245_178_202,
            0.813_309_945_960_877_2,
            0.488_469_074_626_218_7,
        ];
        for (a, b) in g.0.iter().zip(hand) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_property_on_uniform_array() {
        let a = ArrayConfig::uniform(6).unwrap();
        for theta in (0..360).map(f64::from) {
            let g0 = steering_vector(&reference(), &a, theta).unwrap();
            let g1 = steering_vector(&reference(), &a, theta + 60.0).unwrap();
            for k in 0..6 {
                assert_eq!(g1.0[k], g0.0[(k + 1) % 6], "theta {theta} k {k}");
            }
        }
    }

    #[test]
    fn perturbation_bounds_and_identity() {
        let a = ArrayConfig::uniform(6).unwrap();
        let g = steering_vector(&reference(), &a, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb(&g, ManifoldPerturbation::none(), &mut rng), g);
        let p = perturb(&g, ManifoldPerturbation::new(0.1).unwrap(), &mut rng);
        assert!(g.0.iter().zip(&p.0).all(|(a, b)| (a - b).abs() <= 0.1));
        assert!(ManifoldPerturbation::new(-0.1).is_err());
    }

    #[test]
    fn perturbation_moments() {
        // U(-e, e): mean 0, variance e^2 / 3
        let eps = 0.05;
        let base = GainVector(vec![0.0; 10]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pert = ManifoldPerturbation::new(eps).unwrap();
        let draws: Vec<f64> = (0..10_000)
            .flat_map(|_| perturb(&base, pert, &mut rng).0)
            .collect();
        assert_eq!(draws.len(), 100_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() <= 0.001, "mean {mean}");
        assert!((var / (eps * eps / 3.0) - 1.0).abs() <= 0.05, "var {var}");
    }

    #[test]
    fn manifold_matrix_columns() {
        let a = ArrayConfig::uniform(6).unwrap();
        let grid = angle_grid(1.0).unwrap();
        assert_eq!(grid.len(), 360);
        let m = manifold_matrix(&reference(), &a, &grid).unwrap();
        assert_eq!(m.shape(), (6, 360));
        for (j, &theta) in grid.iter().enumerate() {
            let g = steering_vector(&reference(), &a, theta).unwrap();
            assert!(m.column(j).iter().zip(&g.0).all(|(x, y)| x == y));
            assert!(m.column(j).iter().any(|&x| x > 0.0));
        }
        let single = manifold_matrix(&reference(), &a, &[33.0]).unwrap();
        let wrapped = manifold_matrix(&reference(), &a, &[393.0]).unwrap();
        assert_eq!(single, wrapped);
        assert!(manifold_matrix(&reference(), &a, &[]).is_err());
    }

    #[test]
    fn grid_construction() {
        assert_eq!(angle_grid(90.0).unwrap(), vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(angle_grid(0.5).unwrap().len(), 720);
        assert_eq!(angle_grid(7.0).unwrap().last().copied(), Some(357.0));
        assert!(angle_grid(0.0).is_err());
    }
}
