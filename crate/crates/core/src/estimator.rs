//! Subspace direction finding on a gain manifold.
//!
//! Pipeline: sample covariance `R = X X^T / T`, symmetric eigendecomposition
//! with eigenvalues sorted descending, noise subspace from the trailing
//! eigenvectors, and the pseudo-spectrum `P(theta) = 1 / |E_n^T g(theta)|^2`
//! searched over an angle grid. Everything is real-valued.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{manifold_matrix, ArrayConfig};
use crate::pattern::{wrap_deg, GaussianMixturePattern};
use crate::signal::SnapshotMatrix;

mod jacobi;

/// Lower bound on the spectrum denominator so exact orthogonality stays finite.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

const SYMMETRY_TOL: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!("covariance must be square, got {:?}", m.shape())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariance has non-finite entries".into()));
        }
        let scale = m.amax();
        let n = m.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSubspace(DMatrix<f64>);

impl NoiseSubspace {
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    /// `|E_n^T g|^2`
    pub fn projection_energy(&self, g: &[f64]) -> f64 {
        self.0
            .column_iter()
            .map(|col| {
                let d: f64 = col.iter().zip(g).map(|(a, b)| a * b).sum();
                d * d
            })
            .sum()
    }
}

/// How steering vectors enter the spectrum denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumScaling {
    /// Raw gain vectors `g(theta)`.
    #[default]
    Raw,
    /// Unit-norm `g(theta) / |g(theta)|`. Not part of the reference method;
    /// kept for ambiguity diagnostics.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSpectrum {
    pub grid_deg: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpatialSpectrum {
    /// Index of the largest value; equal values resolve to the smallest angle.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.values.len() {
            let (v, b) = (self.values[i], self.values[best]);
            if v > b || (v == b && self.grid_deg[i] < self.grid_deg[best]) {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub theta_deg: f64,
    pub peak_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpatialSpectrum>,
}

pub fn sample_covariance(x: &SnapshotMatrix) -> Result<CovarianceMatrix> {
    let t = x.n_samples();
    if t < 2 {
        return Err(Error::invalid("covariance needs at least 2 snapshots"));
    }
    let d = x.data();
    let n = d.nrows();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let inv_t = 1.0 / t as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = d.row(i).dot(&d.row(j)) * inv_t;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix(r))
}

/// Symmetric eigendecomposition, eigenvalues descending. Each eigenvector's
/// first component with magnitude above 1e-12 is made nonnegative.
pub fn eig_sym(r: &CovarianceMatrix) -> EigenPair {
    let (vals, vecs) = jacobi::jacobi_eigen(&r.0);
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vecs.column(src).into_owned();
        col /= col.norm();
        if let Some(first) = col.iter().find(|v| v.abs() > SIGN_TOL) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    EigenPair {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors,
    }
}

/// Eigenvectors of the `N - n_sources` smallest eigenvalues.
///
/// `n_sources == N` yields an empty subspace, which makes every grid angle
/// hit the denominator floor.
pub fn noise_subspace(e: &EigenPair, n_sources: usize) -> Result<NoiseSubspace> {
    let n = e.values.len();
    if n_sources == 0 {
        return Err(Error::invalid("source count must be >= 1"));
    }
    if n_sources > n {
        return Err(Error::invalid(format!(
            "{n_sources} sources cannot be resolved by {n} elements"
        )));
    }
    Ok(NoiseSubspace(e.vectors.columns(n_sources, n - n_sources).into_owned()))
}

pub fn spatial_spectrum(
    en: &NoiseSubspace,
    pattern: &GaussianMixturePattern,
    array: &ArrayConfig,
    grid_deg: &[f64],
    scaling: SpectrumScaling,
) -> Result<SpatialSpectrum> {
    let manifold = manifold_matrix(pattern, array, grid_deg)?;
    Ok(spectrum_from_manifold(en, &manifold, grid_deg, scaling))
}

fn spectrum_from_manifold(
    en: &NoiseSubspace,
    manifold: &DMatrix<f64>,
    grid_deg: &[f64],
    scaling: SpectrumScaling,
) -> SpatialSpectrum {
    let values = manifold
        .column_iter()
        .map(|g| {
            let g = g.as_slice();
            let mut denom = en.projection_energy(g);
            if scaling == SpectrumScaling::Normalized {
                let norm2: f64 = g.iter().map(|v| v * v).sum();
                if norm2 > 0.0 {
                    denom /= norm2;
                }
            }
            1.0 / denom.max(DENOMINATOR_FLOOR)
        })
        .collect();
    SpatialSpectrum {
        grid_deg: grid_deg.iter().map(|&t| wrap_deg(t)).collect(),
        values,
    }
}

/// Signed circular difference `estimate - truth` in `(-180, 180]`.
pub fn angular_error(estimate_deg: f64, truth_deg: f64) -> f64 {
    let d = (estimate_deg - truth_deg).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Direction finder with the search manifold precomputed for one array,
/// pattern, and grid.
#[derive(Debug, Clone)]
pub struct DoaEstimator {
    pattern: GaussianMixturePattern,
    array: ArrayConfig,
    grid_deg: Vec<f64>,
    manifold: DMatrix<f64>,
    n_sources: usize,
    scaling: SpectrumScaling,
}

impl DoaEstimator {
    pub fn new(
        pattern: GaussianMixturePattern,
        array: ArrayConfig,
        grid_deg: Vec<f64>,
    ) -> Result<Self> {
        let manifold = manifold_matrix(&pattern, &array, &grid_deg)?;
        let grid_deg = grid_deg.into_iter().map(wrap_deg).collect();
        Ok(Self {
            pattern,
            array,
            grid_deg,
            manifold,
            n_sources: 1,
            scaling: SpectrumScaling::Raw,
        })
    }

    pub fn with_scaling(mut self, scaling: SpectrumScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn pattern(&self) -> &GaussianMixturePattern {
        &self.pattern
    }

    pub fn array(&self) -> &ArrayConfig {
        &self.array
    }

    pub fn grid_deg(&self) -> &[f64] {
        &self.grid_deg
    }

    pub fn noise_subspace(&self, x: &SnapshotMatrix) -> Result<NoiseSubspace> {
        if x.n_channels() != self.array.n_elements() {
            return Err(Error::invalid(format!(
                "snapshot matrix has {} channels, array has {} elements",
                x.n_channels(),
                self.array.n_elements()
            )));
        }
        let r = sample_covariance(x)?;
        noise_subspace(&eig_sym(&r), self.n_sources)
    }

    pub fn spectrum(&self, x: &SnapshotMatrix) -> Result<SpatialSpectrum> {
        let en = self.noise_subspace(x)?;
        Ok(spectrum_from_manifold(&en, &self.manifold, &self.grid_deg, self.scaling))
    }

    pub fn estimate(&self, x: &SnapshotMatrix) -> Result<DoaEstimate> {
        let spectrum = self.spectrum(x)?;
        let i = spectrum.argmax();
        Ok(DoaEstimate {
            theta_deg: spectrum.grid_deg[i],
            peak_value: spectrum.values[i],
            spectrum: None,
        })
    }

    pub fn estimate_with_spectrum(&self, x: &SnapshotMatrix) -> Result<DoaEstimate> {
        let spectrum = self.spectrum(x)?;
        let i = spectrum.argmax();
        Ok(DoaEstimate {
            theta_deg: spectrum.grid_deg[i],
            peak_value: spectrum.values[i],
            spectrum: Some(spectrum),
        })
    }
}

/// Covariance, eigendecomposition, noise subspace, spectrum, and argmax in one call.
pub fn estimate_doa(
    x: &SnapshotMatrix,
    pattern: &GaussianMixturePattern,
    array: &ArrayConfig,
    grid_deg: &[f64],
) -> Result<DoaEstimate> {
    DoaEstimator::new(pattern.clone(), array.clone(), grid_deg.to_vec())?.estimate(x)
}

/// Result of probing one grid angle for a second, distant near-null of the
/// noise-free spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityProbe {
    pub theta_deg: f64,
    /// `|E_n^T g| / |g|` at the true angle.
    pub residual_at_truth: f64,
    /// Smallest normalised residual at angles further than the guard band.
    pub min_off_peak_residual: f64,
    pub off_peak_angle_deg: f64,
}

/// For every grid angle, build the noise-free covariance, then report the
/// closest competing direction outside `guard_deg` of the truth. A small
/// `min_off_peak_residual` flags a direction the gain manifold cannot tell
/// apart from the truth.
pub fn ambiguity_scan(
    pattern: &GaussianMixturePattern,
    array: &ArrayConfig,
    grid_deg: &[f64],
    guard_deg: f64,
) -> Result<Vec<AmbiguityProbe>> {
    let manifold = manifold_matrix(pattern, array, grid_deg)?;
    let norms: Vec<f64> = manifold.column_iter().map(|c| c.norm()).collect();
    let mut out = Vec::with_capacity(grid_deg.len());
    for (j, &theta) in grid_deg.iter().enumerate() {
        let g = manifold.column(j);
        let r = CovarianceMatrix(&g * g.transpose());
        let en = noise_subspace(&eig_sym(&r), 1)?;
        let resid = |k: usize| en.projection_energy(manifold.column(k).as_slice()).sqrt() / norms[k];
        let mut best = (f64::INFINITY, f64::NAN);
        for (k, &phi) in grid_deg.iter().enumerate() {
            if angular_error(phi, theta).abs() <= guard_deg {
                continue;
            }
            let v = resid(k);
            if v < best.0 {
                best = (v, wrap_deg(phi));
            }
        }
        out.push(AmbiguityProbe {
            theta_deg: wrap_deg(theta),
            residual_at_truth: resid(j),
            min_off_peak_residual: best.0,
            off_peak_angle_deg: best.1,
        });
    }
    Ok(out)
}
