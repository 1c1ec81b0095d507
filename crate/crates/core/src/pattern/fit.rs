//! Levenberg-Marquardt fit of a Gaussian-sum pattern to sampled gains.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{wrap_deg, GaussianMixturePattern, PatternSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tolerance: f64,
    /// Width assigned to every component at initialisation.
    pub initial_width_deg: f64,
    pub min_width_deg: f64,
    /// Minimum spacing between initial centres.
    pub min_separation_deg: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tolerance: 1e-9,
            initial_width_deg: 60.0,
            min_width_deg: 1.0,
            min_separation_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub pattern: GaussianMixturePattern,
    pub converged: bool,
    pub iterations: usize,
    /// Sum of squared residuals at the starting point.
    pub initial_cost: f64,
    pub final_cost: f64,
    pub rmse: f64,
    /// Cost after every accepted step, starting with `initial_cost`.
    pub cost_trace: Vec<f64>,
}

/// Fit a `k`-component mixture by damped least squares on the residuals
/// `g(theta_j) - gain_j`.
pub fn fit_pattern(samples: &[PatternSample], k: usize, opts: &FitOptions) -> Result<FitReport> {
    if k == 0 {
        return Err(Error::invalid("component count must be >= 1"));
    }
    if samples.len() < 3 * k {
        return Err(Error::invalid(format!(
            "need at least {} samples for {k} components, got {}",
            3 * k,
            samples.len()
        )));
    }
    let mut data: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for s in samples {
        if !s.angle_deg.is_finite() || !s.gain.is_finite() {
            return Err(Error::Domain(format!("pattern sample {s:?}")));
        }
        data.push((wrap_deg(s.angle_deg), s.gain));
    }
    data.sort_by(|a, b| a.0.total_cmp(&b.0));
    if data.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("sample angles must be distinct after wrapping"));
    }

    let init = initial_params(&data, k, opts);
    let problem = Problem {
        data: &data,
        min_width: opts.min_width_deg,
    };
    Ok(problem.solve(init, opts))
}

/// Centres at the `k` largest well-separated local maxima of the sampled
/// curve, topped up with the largest remaining samples when the curve has
/// fewer peaks than components.
fn initial_params(data: &[(f64, f64)], k: usize, opts: &FitOptions) -> Vec<f64> {
    let n = data.len();
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let prev = data[(i + n - 1) % n].1;
            let next = data[(i + 1) % n].1;
            data[i].1 >= prev && data[i].1 >= next
        })
        .collect();
    maxima.sort_by(|&a, &b| data[b].1.total_cmp(&data[a].1));

    let mut by_gain: Vec<usize> = (0..n).collect();
    by_gain.sort_by(|&a, &b| data[b].1.total_cmp(&data[a].1));

    let far_enough = |chosen: &[usize], i: usize, sep: f64| {
        chosen.iter().all(|&j| {
            let d = (data[i].0 - data[j].0).abs();
            d.min(360.0 - d) >= sep
        })
    };

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for &i in &maxima {
        if chosen.len() == k {
            break;
        }
        if far_enough(&chosen, i, opts.min_separation_deg) {
            chosen.push(i);
        }
    }
    for &i in &by_gain {
        if chosen.len() == k {
            break;
        }
        if far_enough(&chosen, i, opts.min_separation_deg) {
            chosen.push(i);
        }
    }
    for &i in &by_gain {
        if chosen.len() == k {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }

    let width = opts.initial_width_deg.max(opts.min_width_deg);
    chosen
        .iter()
        .flat_map(|&i| [data[i].1.max(0.0), data[i].0, width])
        .collect()
}

struct Problem<'a> {
    data: &'a [(f64, f64)],
    min_width: f64,
}

impl Problem<'_> {
    fn cost(&self, p: &[f64]) -> f64 {
        self.data
            .iter()
            .map(|&(theta, y)| {
                let r = model(p, theta) - y;
                r * r
            })
            .sum()
    }

    fn project(&self, p: &mut [f64]) {
        for c in p.chunks_exact_mut(3) {
            c[0] = c[0].max(0.0);
            c[1] = c[1].clamp(0.0, 360.0 - 1e-9);
            c[2] = c[2].max(self.min_width);
        }
    }

    fn normal_equations(&self, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let m = p.len();
        let mut jtj = DMatrix::<f64>::zeros(m, m);
        let mut jtr = DVector::<f64>::zeros(m);
        let mut row = vec![0.0; m];
        for &(theta, y) in self.data {
            let r = model(p, theta) - y;
            residual_gradient(p, theta, &mut row);
            for a in 0..m {
                jtr[a] += row[a] * r;
                for b in a..m {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        (jtj, jtr)
    }

    fn solve(&self, mut params: Vec<f64>, opts: &FitOptions) -> FitReport {
        self.project(&mut params);
        let initial_cost = self.cost(&params);
        let mut cost = initial_cost;
        let mut trace = vec![cost];
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iterations {
            iterations += 1;
            if cost == 0.0 {
                converged = true;
                break;
            }
            let (jtj, jtr) = self.normal_equations(&params);
            let mut accepted = false;
            while lambda < 1e16 {
                let mut a = jtj.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&jtr));
                let mut candidate: Vec<f64> =
                    params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
                self.project(&mut candidate);
                let new_cost = self.cost(&candidate);
                if new_cost.is_finite() && new_cost < cost {
                    let rel = (cost - new_cost) / cost;
                    params = candidate;
                    cost = new_cost;
                    trace.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < opts.rel_tolerance {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if converged {
                break;
            }
            if !accepted {
                // no descent direction left at any damping: a stationary point
                converged = true;
                break;
            }
        }

        let rmse = (cost / self.data.len() as f64).sqrt();
        FitReport {
            pattern: GaussianMixturePattern::from_params_unchecked(&params),
            converged,
            iterations,
            initial_cost,
            final_cost: cost,
            rmse,
            cost_trace: trace,
        }
    }
}

#[inline]
fn model(p: &[f64], theta: f64) -> f64 {
    p.chunks_exact(3)
        .map(|c| {
            let d = (theta - c[1]) / c[2];
            c[0] * (-d * d).exp()
        })
        .sum()
}

/// Gradient of the model at `theta` with respect to `[a_i, b_i, c_i]`.
#[inline]
pub(crate) fn residual_gradient(p: &[f64], theta: f64, out: &mut [f64]) {
    for (c, o) in p.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        let (a, b, w) = (c[0], c[1], c[2]);
        let u = theta - b;
        let e = (-(u * u) / (w * w)).exp();
        o[0] = e;
        o[1] = a * e * 2.0 * u / (w * w);
        o[2] = a * e * 2.0 * u * u / (w * w * w);
    }
}
