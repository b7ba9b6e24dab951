//! The adjacent walk itself: parameters, configurations, event-driven
//! simulation of `X` and of the comparison process `M`, and exact sampling
//! from the invariant measure.

use rand::Rng as _;
use rand_distr::Exp1;
use thiserror::Error;

use crate::distributions::{BetaParams, BetaSampler, check_left_tail, sample_ln_gamma};
use crate::rng::Rng;
use crate::special::inc_beta;

/// Largest value allowed for `α_k + α_{k+1}` inside a site sampler.
pub(crate) const SHAPE_CAP: f64 = 1e290;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("resampling variable {0} lies outside [0, 1]")]
    Domain(f64),
    #[error("site {k} outside 1..={max}")]
    InvalidSite { k: usize, max: usize },
    #[error("operation requires λ > 0")]
    SymmetricCase,
    #[error("regime violation: μ_k0 = {mu_k0:.3e} ≥ λ²/4 = {bound:.3e}")]
    RegimeViolation { mu_k0: f64, bound: f64 },
}

/// `(N, λ, α_1)` with everything derived from them.
#[derive(Clone, Debug)]
pub struct ModelParams {
    n: usize,
    lambda: f64,
    alpha1: f64,
    ln_r: f64,
    samplers: Vec<BetaSampler>,
}

impl ModelParams {
    pub fn new(n: usize, lambda: f64, alpha1: f64) -> Result<Self, ProcessError> {
        if n < 2 {
            return Err(ProcessError::InvalidParams(format!("N = {n} must be at least 2")));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(ProcessError::InvalidParams(format!("λ = {lambda} must lie in [0, 1)")));
        }
        if !(alpha1.is_finite() && alpha1 >= 1.0) {
            return Err(ProcessError::InvalidParams(format!("α_1 = {alpha1} must be ≥ 1")));
        }
        let ln_r = lambda.ln_1p() - (-lambda).ln_1p();
        let mut p = Self { n, lambda, alpha1, ln_r, samplers: Vec::new() };
        p.samplers = (0..n).map(|k| BetaSampler::new(p.site_params(k.max(1)))).collect();
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn r(&self) -> f64 {
        self.ln_r.exp()
    }

    pub fn ln_r(&self) -> f64 {
        self.ln_r
    }

    /// `ln α_k = ln α_1 + (k-1) ln r`, valid for any integer `k`.
    pub fn ln_alpha(&self, k: usize) -> f64 {
        self.alpha1.ln() + (k as f64 - 1.0) * self.ln_r
    }

    /// `α_k`; may be `+inf` when it exceeds the f64 range.
    pub fn alpha(&self, k: usize) -> f64 {
        self.ln_alpha(k).exp()
    }

    /// `Σ_{i ≤ k} α_i` by direct summation.
    pub fn alpha_partial(&self, k: usize) -> f64 {
        (1..=k).map(|i| self.alpha(i)).sum()
    }

    pub fn alpha_total(&self) -> f64 {
        self.alpha_partial(self.n)
    }

    /// Shapes of the law of `x_k/N` under the invariant measure.
    pub fn marginal_shapes(&self, k: usize) -> (f64, f64) {
        let a: f64 = (1..=k).map(|i| self.alpha(i)).sum();
        let b: f64 = (k + 1..=self.n).map(|i| self.alpha(i)).sum();
        (a, b)
    }

    /// `ln a_N` with `a_N = N / (1 - r^{-N})`.
    pub fn ln_a_n(&self) -> Result<f64, ProcessError> {
        self.require_asymmetric()?;
        let n = self.n as f64;
        Ok(n.ln() - (-(-n * self.ln_r).exp_m1()).ln())
    }

    pub fn a_n(&self) -> Result<f64, ProcessError> {
        self.ln_a_n().map(f64::exp)
    }

    /// `k_0 = ⌊N √(log N / (λN))⌋`.
    pub fn k0(&self) -> Result<usize, ProcessError> {
        self.require_asymmetric()?;
        let n = self.n as f64;
        Ok((n * (n.ln() / (self.lambda * n)).sqrt()).floor() as usize)
    }

    /// Stationary mean `x̄_k = N (r^k - 1)/(r^N - 1)`, evaluated without overflow.
    pub fn equilibrium_mean(&self, k: usize) -> f64 {
        let n = self.n as f64;
        if self.lambda == 0.0 {
            return k as f64;
        }
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        let ratio = (-kf * self.ln_r).exp_m1() / (-n * self.ln_r).exp_m1();
        n * ((kf - n) * self.ln_r).exp() * ratio
    }

    /// Beta shapes used to resample site `k`: `(α_k, α_{k+1})`, scaled down
    /// together (preserving their ratio `r`) when their sum would overflow.
    pub fn site_params(&self, k: usize) -> BetaParams {
        let r = self.r();
        let c = self.alpha(k).min(SHAPE_CAP / (1.0 + r));
        BetaParams::new(c, c * r).expect("shapes are ≥ 1 by construction")
    }

    #[inline]
    pub fn sampler(&self, k: usize) -> &BetaSampler {
        &self.samplers[k]
    }

    pub fn require_asymmetric(&self) -> Result<(), ProcessError> {
        if self.lambda > 0.0 { Ok(()) } else { Err(ProcessError::SymmetricCase) }
    }
}

/// Heights `0 = x_0 ≤ x_1 ≤ … ≤ x_N = N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub heights: Vec<f64>,
}

impl Configuration {
    pub fn new(heights: Vec<f64>) -> Result<Self, ProcessError> {
        let n = heights.len().checked_sub(1).filter(|&n| n >= 2).ok_or_else(|| {
            ProcessError::InvalidConfiguration("need at least three heights".into())
        })?;
        if heights[0] != 0.0 || heights[n] != n as f64 {
            return Err(ProcessError::InvalidConfiguration(format!(
                "endpoints must be 0 and {n}"
            )));
        }
        if heights.iter().any(|h| !h.is_finite()) || heights.windows(2).any(|w| w[0] > w[1]) {
            return Err(ProcessError::InvalidConfiguration(
                "heights must be finite and nondecreasing".into(),
            ));
        }
        Ok(Self { heights })
    }

    /// `(0, N, …, N)`.
    pub fn max(n: usize) -> Self {
        let mut heights = vec![n as f64; n + 1];
        heights[0] = 0.0;
        Self { heights }
    }

    /// `(0, …, 0, N)`.
    pub fn min(n: usize) -> Self {
        let mut heights = vec![0.0; n + 1];
        heights[n] = n as f64;
        Self { heights }
    }

    pub fn n(&self) -> usize {
        self.heights.len() - 1
    }

    /// Gaps `η_k = x_k - x_{k-1}`, `k = 1..=N`.
    pub fn gaps(&self) -> Vec<f64> {
        self.heights.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `x_k ← x_{k-1} + u (x_{k+1} - x_{k-1})`.
    pub fn resample(&mut self, k: usize, u: f64) -> Result<(), ProcessError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(ProcessError::Domain(u));
        }
        if k == 0 || k >= self.n() {
            return Err(ProcessError::InvalidSite { k, max: self.n() - 1 });
        }
        self.resample_unchecked(k, u);
        Ok(())
    }

    #[inline]
    pub(crate) fn resample_unchecked(&mut self, k: usize, u: f64) {
        let lo = self.heights[k - 1];
        let hi = self.heights[k + 1];
        self.heights[k] = (lo + u * (hi - lo)).min(hi);
    }
}

/// Functional form of [`Configuration::resample`].
pub fn resample_site(c: &Configuration, k: usize, u: f64) -> Result<Configuration, ProcessError> {
    let mut out = c.clone();
    out.resample(k, u)?;
    Ok(out)
}

/// Superposition of the `N-1` rate-one site clocks: one exponential clock of
/// rate `N-1` with a uniformly chosen site.
#[derive(Clone, Copy, Debug)]
pub struct EventSchedule {
    rate: f64,
    n: usize,
}

impl EventSchedule {
    pub fn new(n: usize) -> Self {
        Self { rate: (n - 1) as f64, n }
    }

    /// Waiting time to the next event and its site.
    #[inline]
    pub fn next(&self, rng: &mut Rng) -> (f64, usize) {
        let e: f64 = rng.sample(Exp1);
        (e / self.rate, rng.random_range(1..self.n))
    }
}

/// Drives the event loop to `t_end`. `observe(state, i, t)` fires for each
/// `obs_times[i] ≤ t_end` before any event past that time is applied;
/// `event(state, k, t, rng)` applies one update at site `k`.
pub(crate) fn run_events<S, O, E>(
    n: usize,
    t_end: f64,
    obs_times: &[f64],
    rng: &mut Rng,
    state: &mut S,
    mut observe: O,
    mut event: E,
) where
    O: FnMut(&S, usize, f64),
    E: FnMut(&mut S, usize, f64, &mut Rng),
{
    let sched = EventSchedule::new(n);
    let mut t = 0.0;
    let mut next_obs = 0;
    loop {
        let (dt, k) = sched.next(rng);
        let t_next = t + dt;
        while next_obs < obs_times.len()
            && obs_times[next_obs] < t_next
            && obs_times[next_obs] <= t_end
        {
            observe(state, next_obs, obs_times[next_obs]);
            next_obs += 1;
        }
        if t_next > t_end {
            break;
        }
        t = t_next;
        event(state, k, t, rng);
    }
}

/// Simulates `X` from `c0` up to `t_end`. `observe(i, t, x)` receives the
/// configuration at each observation time `obs_times[i] ≤ t_end`.
pub fn simulate_x<O>(
    c0: &Configuration,
    p: &ModelParams,
    t_end: f64,
    obs_times: &[f64],
    rng: &mut Rng,
    mut observe: O,
) -> Configuration
where
    O: FnMut(usize, f64, &Configuration),
{
    assert_eq!(c0.n(), p.n(), "configuration size does not match N");
    let mut c = c0.clone();
    run_events(
        p.n(),
        t_end,
        obs_times,
        rng,
        &mut c,
        |c, i, t| observe(i, t, c),
        |c, k, _, rng| {
            let u = p.sampler(k).sample(rng);
            c.resample_unchecked(k, u);
        },
    );
    debug_assert_eq!(c.heights[p.n()], p.n() as f64);
    c
}

/// The weights `μ_k` of the comparison process `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuSchedule {
    pub c_cal: f64,
    pub k0: usize,
    /// `mu[k]` for `k = 0..N`; index 0 unused.
    pub mu: Vec<f64>,
    pub regime_violation: bool,
}

impl MuSchedule {
    /// Schedule for a given constant `C`.
    pub fn with_constant(p: &ModelParams, c: f64) -> Result<Self, ProcessError> {
        let k0 = p.k0()?;
        let ln_n = (p.n() as f64).ln();
        let mu = (0..p.n())
            .map(|k| {
                if k < k0 {
                    1.0 - p.lambda()
                } else {
                    2.0 * c * ln_n * (-0.5 * k as f64 * p.ln_r()).exp()
                }
            })
            .collect::<Vec<_>>();
        let lambda2 = p.lambda() * p.lambda();
        let regime_violation = k0 < p.n() && mu[k0] >= 0.25 * lambda2;
        Ok(Self { c_cal: c, k0, mu, regime_violation })
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    /// Weight `(1+λ+μ_k)/2` put on the left neighbour.
    pub fn left_weight(&self, k: usize, lambda: f64) -> f64 {
        (0.5 * (1.0 + lambda + self.mu[k])).min(1.0)
    }

    pub fn check_regime(&self, p: &ModelParams) -> Result<(), ProcessError> {
        if self.regime_violation {
            Err(ProcessError::RegimeViolation {
                mu_k0: self.mu[self.k0],
                bound: 0.25 * p.lambda() * p.lambda(),
            })
        } else {
            Ok(())
        }
    }
}

fn tail_bound_holds(p: &ModelParams, c: f64) -> bool {
    let bound = (p.n() as f64).powi(-5);
    (1..p.n()).all(|k| check_left_tail(k, p, c) <= bound)
}

/// Smallest `C` (to resolution 1e-3) with `P(U_k ≤ (1-λ)/2 - C log N r^{-k/2}) ≤ N^{-5}`
/// at every site, and the resulting schedule. A schedule with `μ_{k0} ≥ λ²/4`
/// is returned with `regime_violation` set.
pub fn mu_k_calibrate(p: &ModelParams) -> Result<MuSchedule, ProcessError> {
    p.require_asymmetric()?;
    let mut hi = 1e-3;
    while !tail_bound_holds(p, hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ProcessError::InvalidParams("tail calibration diverged".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if tail_bound_holds(p, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    MuSchedule::with_constant(p, hi)
}

/// Initial condition of `M`: 0 below `k_0`, 1 from `k_0` on (including `k = N`).
pub fn initial_m(p: &ModelParams, mu: &MuSchedule) -> Vec<f64> {
    (0..=p.n()).map(|k| if k < mu.k0 || k == 0 { 0.0 } else { 1.0 }).collect()
}

#[inline]
fn update_m(m: &mut [f64], k: usize, w: f64) {
    m[k] = w * m[k - 1] + (1.0 - w) * m[k + 1];
}

/// Simulates `M` alone up to `t_end`; returns the final heights.
pub fn simulate_m<O>(
    p: &ModelParams,
    mu: &MuSchedule,
    t_end: f64,
    obs_times: &[f64],
    rng: &mut Rng,
    mut observe: O,
) -> Vec<f64>
where
    O: FnMut(usize, f64, &[f64]),
{
    let mut m = initial_m(p, mu);
    let weights: Vec<f64> = (0..p.n()).map(|k| mu.left_weight(k, p.lambda())).collect();
    run_events(
        p.n(),
        t_end,
        obs_times,
        rng,
        &mut m,
        |m, i, t| observe(i, t, m),
        |m, k, _, _| update_m(m, k, weights[k]),
    );
    m
}

/// Outcome of a joint run of `X^max` and `M` on shared clocks.
#[derive(Clone, Debug)]
pub struct JointRecord {
    pub x: Configuration,
    pub m: Vec<f64>,
    /// `M_k ≤ X_k` held at every site after every event.
    pub dominated: bool,
    pub first_violation: Option<f64>,
}

/// Runs `X` from `x0` and `M` with the same event times and sites.
pub fn simulate_x_and_m<O>(
    x0: &Configuration,
    p: &ModelParams,
    mu: &MuSchedule,
    t_end: f64,
    obs_times: &[f64],
    rng: &mut Rng,
    mut observe: O,
) -> JointRecord
where
    O: FnMut(usize, f64, &Configuration, &[f64]),
{
    let mut state = (x0.clone(), initial_m(p, mu));
    let weights: Vec<f64> = (0..p.n()).map(|k| mu.left_weight(k, p.lambda())).collect();
    let mut first_violation =
        state.0.heights.iter().zip(&state.1).any(|(xk, mk)| mk > xk).then_some(0.0);
    run_events(
        p.n(),
        t_end,
        obs_times,
        rng,
        &mut state,
        |s, i, t| observe(i, t, &s.0, &s.1),
        |s, k, t, rng| {
            let u = p.sampler(k).sample(rng);
            s.0.resample_unchecked(k, u);
            update_m(&mut s.1, k, weights[k]);
            if first_violation.is_none() && s.1[k] > s.0.heights[k] {
                first_violation = Some(t);
            }
        },
    );
    let (x, m) = state;
    JointRecord { x, m, dominated: first_violation.is_none(), first_violation }
}

/// Exact draw from the invariant measure: `η/N ~ Dirichlet(α_1, …, α_N)`.
///
/// Gamma variates are drawn in log form and normalized by log-sum-exp, so the
/// shapes may span any number of orders of magnitude.
pub fn sample_stationary(p: &ModelParams, rng: &mut Rng) -> Configuration {
    let n = p.n();
    let ln_g: Vec<f64> = (1..=n).map(|i| sample_ln_gamma(p.ln_alpha(i), rng)).collect();
    let m = ln_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_g.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let nf = n as f64;
    let mut heights = Vec::with_capacity(n + 1);
    heights.push(0.0);
    let mut acc = 0.0;
    for wi in &w[..n - 1] {
        acc += wi;
        heights.push((nf * acc / total).min(nf));
    }
    heights.push(nf);
    Configuration { heights }
}

/// Result of the exact gradient tail evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientTail {
    pub threshold: f64,
    pub probability: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Exact `π_N(∇x_k ≤ C' N^{-4} λ r^{k-N})` from the law
/// `∇x_k / N ~ Beta(α_k + α_{k+1}, α - α_k - α_{k+1})`, compared with `C'' N^{-5}`.
pub fn gradient_tail_check(
    p: &ModelParams,
    k: usize,
    c_prime: f64,
    c_second: f64,
) -> Result<GradientTail, ProcessError> {
    if k == 0 || k >= p.n() {
        return Err(ProcessError::InvalidSite { k, max: p.n() - 1 });
    }
    let n = p.n() as f64;
    let threshold =
        c_prime * n.powi(-4) * p.lambda() * ((k as f64 - n) * p.ln_r()).exp();
    let bound = c_second * n.powi(-5);
    let probability = gradient_cdf(p, k, threshold);
    Ok(GradientTail { threshold, probability, bound, within_bound: probability <= bound })
}

/// `π_N(∇x_k ≤ threshold)`.
pub fn gradient_cdf(p: &ModelParams, k: usize, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        return 0.0;
    }
    let a = p.alpha(k) + p.alpha(k + 1);
    let b: f64 = (1..=p.n()).filter(|&i| i != k && i != k + 1).map(|i| p.alpha(i)).sum();
    inc_beta(a, b, threshold / p.n() as f64).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use crate::stats::{ks_test, mean_se};
    use crate::special::inc_gamma_lower;
    use proptest::prelude::*;

    fn cfg(h: &[f64]) -> Configuration {
        Configuration::new(h.to_vec()).unwrap()
    }

    #[test]
    fn resample_examples() {
        let c = cfg(&[0.0, 2.0, 2.0, 3.0]);
        assert_eq!(resample_site(&c, 1, 0.0).unwrap().heights, vec![0.0, 0.0, 2.0, 3.0]);
        assert_eq!(resample_site(&c, 2, 1.0).unwrap().heights, vec![0.0, 2.0, 3.0, 3.0]);
        let c = cfg(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(resample_site(&c, 2, 0.25).unwrap().heights, vec![0.0, 1.0, 1.5, 3.0]);
        assert_eq!(resample_site(&c, 2, 1.5), Err(ProcessError::Domain(1.5)));
        assert!(resample_site(&c, 3, 0.5).is_err());
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::new(vec![0.0, 3.0, 2.0, 3.0]).is_err());
        assert!(Configuration::new(vec![0.0, 1.0, 2.0, 2.5]).is_err());
        assert!(Configuration::new(vec![0.0, 2.0]).is_err());
        assert_eq!(Configuration::max(3).heights, vec![0.0, 3.0, 3.0, 3.0]);
        assert_eq!(Configuration::min(3).heights, vec![0.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn params_derived_values() {
        let p = ModelParams::new(2, 0.6, 1.0).unwrap();
        assert!((p.r() - 4.0).abs() < 1e-14);
        assert!((p.a_n().unwrap() - 32.0 / 15.0).abs() < 1e-13);
        assert!((p.equilibrium_mean(1) - 2.0 * 3.0 / 15.0).abs() < 1e-14);
        let p = ModelParams::new(10, 0.3, 2.0).unwrap();
        for k in 1..10 {
            assert!(p.alpha(k + 1) >= p.alpha(k));
        }
        let r = p.r();
        let direct = 10.0 * (r.powi(4) - 1.0) / (r.powi(10) - 1.0);
        assert!((p.equilibrium_mean(4) - direct).abs() < 1e-13);
        assert!(p.a_n().unwrap() >= 10.0);
        assert!(ModelParams::new(1, 0.3, 1.0).is_err());
        assert!(ModelParams::new(4, 1.0, 1.0).is_err());
        assert!(ModelParams::new(4, 0.3, 0.5).is_err());
        assert_eq!(ModelParams::new(4, 0.0, 1.0).unwrap().k0(), Err(ProcessError::SymmetricCase));
    }

    #[test]
    fn huge_shapes_are_capped_with_fixed_ratio() {
        let p = ModelParams::new(2000, 0.9, 1.0).unwrap();
        let s = p.site_params(1999);
        assert!(s.a().is_finite() && s.b().is_finite());
        assert!((s.mean() - 0.05).abs() < 1e-12);
        let mut rng = seed_stream(3, 0);
        let u = p.sampler(1999).sample(&mut rng);
        assert!((u - 0.05).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let p = ModelParams::new(8, 0.3, 1.0).unwrap();
        let mut rng = seed_stream(1, 0);
        let c0 = Configuration::max(8);
        assert_eq!(simulate_x(&c0, &p, 0.0, &[], &mut rng, |_, _, _| {}), c0);
        let mu = MuSchedule::with_constant(&p, 1.0).unwrap();
        let m = simulate_m(&p, &mu, 0.0, &[], &mut rng, |_, _, _| {});
        assert_eq!(m, initial_m(&p, &mu));
    }

    #[test]
    fn observers_see_scheduled_times() {
        let p = ModelParams::new(6, 0.3, 1.0).unwrap();
        let mut rng = seed_stream(2, 0);
        let mut seen = Vec::new();
        simulate_x(&Configuration::max(6), &p, 3.0, &[0.0, 1.0, 2.5, 7.0], &mut rng, |i, t, c| {
            assert_eq!(c.heights[6], 6.0);
            seen.push((i, t));
        });
        assert_eq!(seen, vec![(0, 0.0), (1, 1.0), (2, 2.5)]);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = ModelParams::new(16, 0.4, 1.0).unwrap();
        let run = || {
            let mut rng = seed_stream(9, 4);
            simulate_x(&Configuration::max(16), &p, 5.0, &[], &mut rng, |_, _, _| {})
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn m_single_event_rule() {
        let mut m = vec![0.0, 0.2, 0.5, 0.9, 1.0];
        let (lambda, mu) = (0.3, 0.01);
        let w = 0.5 * (1.0 + lambda + mu);
        update_m(&mut m, 2, w);
        assert!((m[2] - (w * 0.2 + (1.0 - w) * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn mu_schedule_shape() {
        let p = ModelParams::new(64, 0.2, 1.0).unwrap();
        let mu = mu_k_calibrate(&p).unwrap();
        let k0 = p.k0().unwrap();
        assert_eq!(mu.k0, k0);
        for k in 1..k0.min(64) {
            assert_eq!(mu.mu(k), 0.8);
        }
        assert!(tail_bound_holds(&p, mu.c_cal));
        assert!(mu.c_cal <= 1e-3 || !tail_bound_holds(&p, mu.c_cal - 1e-3));
        assert!(check_left_tail(10, &p, mu.c_cal) <= 64f64.powi(-5));
    }

    #[test]
    fn mu_regime_at_n256() {
        let p = ModelParams::new(256, 0.25, 1.0).unwrap();
        let mu = mu_k_calibrate(&p).unwrap();
        assert!(mu.mu(mu.k0) < 0.25 * 0.25 * 0.25, "{}", mu.mu(mu.k0));
        assert!(mu.check_regime(&p).is_ok());
    }

    #[test]
    fn stationary_small_cases() {
        let p = ModelParams::new(2, 0.0, 1.0).unwrap();
        let mut rng = seed_stream(4, 0);
        let xs: Vec<f64> =
            (0..10_000).map(|_| sample_stationary(&p, &mut rng).heights[1] / 2.0).collect();
        let (_, pval) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(pval > 0.01, "{pval}");
    }

    #[test]
    fn stationary_mean_matches_equilibrium_profile() {
        let p = ModelParams::new(64, 0.2, 1.0).unwrap();
        let mut rng = seed_stream(5, 0);
        let draws: Vec<Configuration> = (0..5000).map(|_| sample_stationary(&p, &mut rng)).collect();
        for k in [8, 32, 56] {
            let xs: Vec<f64> = draws.iter().map(|c| c.heights[k]).collect();
            let (m, se) = mean_se(&xs);
            assert!((m - p.equilibrium_mean(k)).abs() < 4.0 * se, "k={k}: {m} ± {se}");
        }
    }

    #[test]
    fn stationary_sampler_survives_extreme_shapes() {
        let p = ModelParams::new(2000, 0.9, 1.0).unwrap();
        let mut rng = seed_stream(6, 0);
        let c = sample_stationary(&p, &mut rng);
        assert!(Configuration::new(c.heights.clone()).is_ok());
        assert!((c.heights[1999] - p.equilibrium_mean(1999)).abs() < 0.1);
    }

    #[test]
    fn product_gamma_preserved_by_resampling() {
        // (η_k, η_{k+1}) ~ Γ(α_k) ⊗ Γ(α_{k+1}); resampling the split point of
        // their sum by Beta(α_k, α_{k+1}) must leave both marginals unchanged.
        let p = ModelParams::new(8, 0.3, 1.5).unwrap();
        let k = 3;
        let (a, b) = (p.alpha(k), p.alpha(k + 1));
        let mut rng = seed_stream(7, 0);
        let n = 100_000;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for _ in 0..n {
            let g1 = crate::distributions::sample_gamma(a, &mut rng);
            let g2 = crate::distributions::sample_gamma(b, &mut rng);
            let u = p.sampler(k).sample(&mut rng);
            first.push(u * (g1 + g2));
            second.push((1.0 - u) * (g1 + g2));
        }
        assert!(ks_test(&first, |x| inc_gamma_lower(a, x.max(0.0))).1 > 0.01);
        assert!(ks_test(&second, |x| inc_gamma_lower(b, x.max(0.0))).1 > 0.01);
    }

    #[test]
    fn gradient_tail_examples() {
        let p = ModelParams::new(64, 0.2, 1.0).unwrap();
        assert_eq!(gradient_cdf(&p, 32, 0.0), 0.0);
        let g = gradient_tail_check(&p, 32, 1.0, 1.0).unwrap();
        assert!(g.probability < g.bound);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = gradient_cdf(&p, 32, 0.02 * i as f64);
            assert!(v >= prev);
            prev = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn resample_preserves_order(seed in 0u64..u64::MAX, n in 3usize..40) {
            let mut rng = seed_stream(seed, 0);
            let p = ModelParams::new(n, 0.5, 1.0).unwrap();
            let mut c = sample_stationary(&p, &mut rng);
            for _ in 0..2000 {
                let k = rng.random_range(1..n);
                let u: f64 = rng.random();
                c.resample(k, u).unwrap();
            }
            prop_assert!(c.heights.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(c.heights[n], n as f64);
        }
    }
}
