//! The explicit eigenpair of the generator on linear functionals, the twisted
//! area, exact solutions of the mean-profile ODE, and the Monte Carlo decay
//! check.
//!
//! The mean `m_k(t) = E[x_k(t)]` solves
//! `m_k' = (1+λ)/2 m_{k-1} + (1-λ)/2 m_{k+1} - m_k` with `m_0 = 0`, `m_N = N`.
//! In the variables `g_k = r^{-k/2}(m_k - x̄_k)` the operator is symmetric with
//! sine eigenvectors.

use rand::Rng as _;
use thiserror::Error;

use crate::process::{Configuration, ModelParams, simulate_x};
use crate::rng::{Rng, derive_seed, par_trajectories};
use crate::special::ln_poisson_pmf;
use crate::stats::ols;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("time grid needs at least two points")]
    InsufficientGrid,
    #[error("fewer than two positive mean estimates remain for the fit")]
    NothingToFit,
}

/// `γ_N = -(1 - √(1-λ²) cos(π/N))`.
pub fn gamma_n(p: &ModelParams) -> f64 {
    gamma_j(p.n(), p.lambda(), 1)
}

/// `γ^{(j)} = -(1 - √(1-λ²) cos(πj/N))`, computed without cancellation for
/// small `λ` and large `N`.
pub fn gamma_j(n: usize, lambda: f64, j: usize) -> f64 {
    let s = ((1.0 - lambda) * (1.0 + lambda)).sqrt();
    let half = std::f64::consts::PI * j as f64 / (2.0 * n as f64);
    let one_minus_cos = 2.0 * half.sin().powi(2);
    -(lambda * lambda / (1.0 + s) + s * one_minus_cos)
}

/// Full spectrum of the mean dynamics.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    n: usize,
    ln_r: f64,
    /// `gamma[j-1] = γ^{(j)}`, `j = 1..N-1`.
    pub gamma: Vec<f64>,
    /// `sin(mπ/N)` for `m = 0..2N`.
    sines: Vec<f64>,
    xbar: Vec<f64>,
}

impl EigenSystem {
    pub fn new(p: &ModelParams) -> Self {
        let n = p.n();
        let gamma = (1..n).map(|j| gamma_j(n, p.lambda(), j)).collect();
        let sines = (0..2 * n)
            .map(|m| (std::f64::consts::PI * m as f64 / n as f64).sin())
            .collect();
        Self { n, ln_r: p.ln_r(), gamma, sines, xbar: equilibrium_mean(p) }
    }

    #[inline]
    fn sin_kj(&self, k: usize, j: usize) -> f64 {
        self.sines[(k * j) % (2 * self.n)]
    }

    /// Right eigenvector `r^{k/2} sin(kπj/N)`.
    pub fn mode(&self, j: usize, k: usize) -> f64 {
        (0.5 * k as f64 * self.ln_r).exp() * self.sin_kj(k, j)
    }

    /// Left eigenvector `r^{-k/2} sin(kπj/N)`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        (-0.5 * k as f64 * self.ln_r).exp() * self.sin_kj(k, j)
    }

    /// Spectral coefficients of `c0 - x̄`.
    pub fn coefficients(&self, c0: &Configuration) -> Vec<f64> {
        let n = self.n;
        let g: Vec<f64> = (0..=n)
            .map(|k| (-0.5 * k as f64 * self.ln_r).exp() * (c0.heights[k] - self.xbar[k]))
            .collect();
        (1..n)
            .map(|j| 2.0 / n as f64 * (1..n).map(|k| g[k] * self.sin_kj(k, j)).sum::<f64>())
            .collect()
    }

    /// `E[x_k(t)]` for all `k` by modal expansion.
    pub fn mean_profile(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        let n = self.n;
        let damped: Vec<f64> =
            coeffs.iter().zip(&self.gamma).map(|(c, g)| c * (g * t).exp()).collect();
        (0..=n)
            .map(|k| {
                if k == 0 || k == n {
                    return self.xbar[k];
                }
                let g: f64 = (1..n).map(|j| damped[j - 1] * self.sin_kj(k, j)).sum();
                self.xbar[k] + (0.5 * k as f64 * self.ln_r).exp() * g
            })
            .collect()
    }
}

/// The equilibrium profile `x̄_k = N (r^k - 1)/(r^N - 1)`, `k = 0..=N`.
pub fn equilibrium_mean(p: &ModelParams) -> Vec<f64> {
    (0..=p.n()).map(|k| p.equilibrium_mean(k)).collect()
}

/// `Σ_k r^{-k/2} sin(kπ/N) (upper_k - lower_k)`.
pub fn twisted_area(upper: &Configuration, lower: &Configuration, p: &ModelParams) -> f64 {
    let n = p.n();
    (1..n)
        .map(|k| {
            let w = (-0.5 * k as f64 * p.ln_r()).exp()
                * (std::f64::consts::PI * k as f64 / n as f64).sin();
            w * (upper.heights[k] - lower.heights[k])
        })
        .sum()
}

/// The eigenfunction `f_N(x) = Σ_k r^{-k/2} sin(kπ/N)(x_k - x̄_k)`.
pub fn f_n(c: &Configuration, p: &ModelParams) -> f64 {
    let n = p.n();
    (1..n)
        .map(|k| {
            let w = (-0.5 * k as f64 * p.ln_r()).exp()
                * (std::f64::consts::PI * k as f64 / n as f64).sin();
            w * (c.heights[k] - p.equilibrium_mean(k))
        })
        .sum()
}

/// `E[x(t)]` from `c0` by modal expansion.
pub fn mean_profile_exact(c0: &Configuration, p: &ModelParams, t: f64) -> Vec<f64> {
    let es = EigenSystem::new(p);
    es.mean_profile(&es.coefficients(c0), t)
}

/// `E[x(t)]` from `c0` at each of `times`, by uniformization:
/// `m(t) = Σ_n Pois(n; t) Pⁿ m(0)` with `P` the nearest-neighbour kernel
/// absorbed at `0` and `N`. Every term is nonnegative, so small entries keep
/// full relative accuracy where the modal sum cancels.
pub fn mean_profile_uniformized(c0: &Configuration, p: &ModelParams, times: &[f64]) -> Vec<Vec<f64>> {
    let n = p.n();
    let wl = 0.5 * (1.0 + p.lambda());
    let wr = 0.5 * (1.0 - p.lambda());
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let steps = (t_max + 12.0 * t_max.sqrt() + 40.0).ceil() as u64;
    let mut v = c0.heights.clone();
    let mut next = v.clone();
    let mut acc = vec![vec![0.0; n + 1]; times.len()];
    for step in 0..=steps {
        for (a, &t) in acc.iter_mut().zip(times) {
            let w = ln_poisson_pmf(step, t).exp();
            if w > 0.0 {
                for (ak, vk) in a.iter_mut().zip(&v) {
                    *ak += w * vk;
                }
            }
        }
        for k in 1..n {
            next[k] = wl * v[k - 1] + wr * v[k + 1];
        }
        std::mem::swap(&mut v, &mut next);
    }
    for a in &mut acc {
        a[0] = 0.0;
        a[n] = n as f64;
    }
    acc
}

/// Fitted decay rate of `E[f_N(X^max(t))]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gamma_n: f64,
    /// Grid times dropped because the mean estimate was not positive.
    pub excluded: Vec<f64>,
    pub means: Vec<f64>,
}

fn fit_slope(times: &[f64], means: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(means)
        .filter(|(_, m)| **m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .unzip();
    (x.len() >= 2).then(|| ols(&x, &y).0)
}

/// Simulates `trajectories` copies from `max`, regresses `log Ê[f_N]` on `t`
/// and returns the slope with a percentile-bootstrap 95% interval.
pub fn decay_check(
    p: &ModelParams,
    t_grid: &[f64],
    trajectories: usize,
    seed: u64,
    bootstrap_reps: usize,
) -> Result<DecayFit, SpectralError> {
    if t_grid.len() < 2 {
        return Err(SpectralError::InsufficientGrid);
    }
    let t_end = t_grid.iter().cloned().fold(0.0, f64::max);
    let x0 = Configuration::max(p.n());
    let samples: Vec<Vec<f64>> = par_trajectories(trajectories, seed, |_, rng| {
        let mut out = vec![0.0; t_grid.len()];
        simulate_x(&x0, p, t_end, t_grid, rng, |i, _, c| out[i] = f_n(c, p));
        out
    });
    let column_means = |idx: &mut dyn Iterator<Item = usize>| {
        let mut sum = vec![0.0; t_grid.len()];
        let mut count = 0usize;
        for i in idx {
            for (s, v) in sum.iter_mut().zip(&samples[i]) {
                *s += v;
            }
            count += 1;
        }
        sum.iter().map(|s| s / count as f64).collect::<Vec<f64>>()
    };
    let means = column_means(&mut (0..trajectories));
    let slope = fit_slope(t_grid, &means).ok_or(SpectralError::NothingToFit)?;
    let excluded = t_grid.iter().zip(&means).filter(|(_, m)| **m <= 0.0).map(|(t, _)| *t).collect();

    let boot_seed = derive_seed(seed, "bootstrap");
    let mut boot: Vec<f64> = par_trajectories(bootstrap_reps, boot_seed, |_, rng: &mut Rng| {
        let mut idx = (0..trajectories).map(|_| rng.random_range(0..trajectories));
        fit_slope(t_grid, &column_means(&mut idx)).unwrap_or(f64::NAN)
    })
    .into_iter()
    .filter(|s| s.is_finite())
    .collect();
    boot.sort_by(|a, b| a.total_cmp(b));
    let (ci_low, ci_high) = if boot.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (crate::stats::quantile(&boot, 0.025), crate::stats::quantile(&boot, 0.975))
    };
    Ok(DecayFit { slope, ci_low, ci_high, gamma_n: gamma_n(p), excluded, means })
}
