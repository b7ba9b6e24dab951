//! Total-variation bounds and mixing-time windows.
//!
//! Both bounds come from the same coupled runs of `(X^max, X^π)` with `X^π(0)`
//! drawn from equilibrium:
//!
//! * upper: `‖P^max_t − π‖ ≤ P(τ > t)` with `τ` the coalescence time;
//! * lower: for an increasing event `A = {x_k ≥ θ}`,
//!   `P^max_t(A) − π(A) = P(top ∈ A, bottom ∉ A, τ > t)`, a binomial
//!   proportion under the monotone coupling. The maximum over a finite family
//!   of such events is taken with a Bonferroni-adjusted Wilson bound.

use thiserror::Error;

use crate::coupling::{CouplingError, TripleRecord, simulate_coupled, simulate_triple};
use crate::hydro::{HydroError, Transform};
use crate::process::{Configuration, ModelParams, ProcessError, sample_stationary};
use crate::rng::{derive_seed, par_trajectories};
use crate::special::inc_beta_below_mean;
use crate::stats::{Z95, normal_upper_quantile, wilson};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error("time grid must be nonempty, nonnegative and increasing")]
    BadGrid,
    #[error("mixing window is empty: t_lower = {t_lower} > t_upper = {t_upper}")]
    InconsistentWindow { t_lower: f64, t_upper: f64 },
}

/// `t_δ = (1+δ) N log r / (1 − √(1−λ²))`, in real time.
pub fn t_delta(p: &ModelParams, delta: f64) -> Result<f64, MixingError> {
    p.require_asymmetric()?;
    let lambda = p.lambda();
    let s = ((1.0 - lambda) * (1.0 + lambda)).sqrt();
    let gap = lambda * lambda / (1.0 + s);
    Ok((1.0 + delta) * p.n() as f64 * p.ln_r() / gap)
}

/// `4N/λ`.
pub fn cutoff_scale(p: &ModelParams) -> f64 {
    4.0 * p.n() as f64 / p.lambda()
}

/// `P_π(x_k/N ≥ θ)` from the exact Beta marginal. The deviation from the
/// mean is formed before any rounding of the shapes, so the tail stays
/// resolved when the shapes exceed `1/ε`.
pub fn stationary_upper_tail(p: &ModelParams, k: usize, theta: f64) -> f64 {
    let n = p.n();
    if k == 0 {
        return if theta <= 0.0 { 1.0 } else { 0.0 };
    }
    if k >= n {
        return if theta <= 1.0 { 1.0 } else { 0.0 };
    }
    let ln_r = p.ln_r();
    let nf = n as f64;
    let mean = p.equilibrium_mean(k) / nf;
    let upper_mass = (nf - p.equilibrium_mean(k)) / nf;
    let ln_total = if ln_r > 0.0 {
        p.ln_alpha(n) + (-(-(nf * ln_r)).exp_m1()).ln() - (-(-ln_r).exp_m1()).ln()
    } else {
        p.alpha1().ln() + nf.ln()
    };
    let ln_cap = (1e290f64).ln();
    let (total, scale) = if ln_total > ln_cap {
        (ln_cap.exp(), (0.5 * (ln_total - ln_cap)).exp())
    } else {
        (ln_total.exp(), 1.0)
    };
    let (a, b) = (total * mean, total * upper_mass);
    let delta = (theta - mean) * scale;
    if delta >= 0.0 {
        inc_beta_below_mean(b, a, delta)
    } else {
        1.0 - inc_beta_below_mean(a, b, -delta)
    }
}

/// Which construction produced a threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StatisticKind {
    /// `T(x_k) ≤ 1 − k/N − margin`.
    Transformed { margin: f64 },
    /// `x_{N−1}` above its equilibrium upper `beta`-quantile.
    Front { beta: f64 },
}

/// The event `{x_k ≥ threshold}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Statistic {
    pub k: usize,
    pub threshold: f64,
    pub pi_prob: f64,
    pub kind: StatisticKind,
}

/// Thresholds used by the lower bound: transformed thresholds at
/// `k = ⌊jN/20⌋` with margins 0.05 and 0.1, and the front coordinate at the
/// equilibrium 10⁻³ and 10⁻² upper quantiles.
pub fn statistic_family(p: &ModelParams) -> Result<Vec<Statistic>, MixingError> {
    let n = p.n();
    let nf = n as f64;
    let tr = Transform::new(p)?;
    let mut ks: Vec<usize> = (1..20).map(|j| j * n / 20).filter(|k| (1..n).contains(k)).collect();
    ks.dedup();
    let mut out = Vec::new();
    for &k in &ks {
        for margin in [0.05, 0.1] {
            let f = 1.0 - k as f64 / nf - margin;
            if f <= 0.0 {
                continue;
            }
            let threshold = tr.invert(f);
            if !(threshold > p.equilibrium_mean(k) && threshold < nf) {
                continue;
            }
            let pi_prob = stationary_upper_tail(p, k, threshold / nf);
            out.push(Statistic { k, threshold, pi_prob, kind: StatisticKind::Transformed { margin } });
        }
    }
    let k = n - 1;
    let mean = p.equilibrium_mean(k) / nf;
    for beta in [1e-3, 1e-2] {
        let (mut lo, mut hi) = (mean, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stationary_upper_tail(p, k, mid) > beta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi - mean > 1e-12 && hi < 1.0 {
            let pi_prob = stationary_upper_tail(p, k, hi);
            out.push(Statistic { k, threshold: hi * nf, pi_prob, kind: StatisticKind::Front { beta } });
        }
    }
    Ok(out)
}

/// Monte Carlo estimate with a confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Conservative lower bound at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    /// Best simultaneous lower confidence limit, floored at 0.
    pub bound: f64,
    /// Point estimate of `P^max_t(A) − π(A)` for the selected event.
    pub point: f64,
    /// Index into the statistic family.
    pub statistic: Option<usize>,
    /// No usable event.
    pub degenerate: bool,
}

/// Both bounds on a time grid.
#[derive(Clone, Debug)]
pub struct TvProfile {
    pub times: Vec<f64>,
    pub upper: Vec<TvEstimate>,
    pub lower: Vec<LowerBound>,
    pub family: Vec<Statistic>,
    pub trajectories: usize,
    pub merge_times: Vec<Option<f64>>,
    pub order_violations: u64,
}

fn check_grid(t_grid: &[f64]) -> Result<(), MixingError> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MixingError::BadGrid);
    }
    Ok(())
}

/// Runs `trajectories` coupled `(max, π)` pairs to `max(t_grid)` (or
/// coalescence) and evaluates both bounds at every grid time.
pub fn tv_profile(
    p: &ModelParams,
    t_grid: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<TvProfile, MixingError> {
    check_grid(t_grid)?;
    let family = statistic_family(p)?;
    let n = p.n();
    let t_end = *t_grid.last().expect("nonempty");
    let m = family.len();
    let runs = par_trajectories(trajectories, seed, |_, rng| {
        let lower0 = sample_stationary(p, rng);
        let mut hits = vec![vec![false; m]; t_grid.len()];
        let rec = simulate_coupled(&Configuration::max(n), &lower0, p, t_end, t_grid, true, rng, |i, _, s| {
            if s.fully_merged {
                return;
            }
            for (j, st) in family.iter().enumerate() {
                hits[i][j] = s.upper.heights[st.k] >= st.threshold && s.lower.heights[st.k] < st.threshold;
            }
        });
        rec.map(|r| (r.merge_time, r.order_violations, hits))
    });
    let mut merge_times = Vec::with_capacity(trajectories);
    let mut order_violations = 0;
    let mut counts = vec![vec![0usize; m]; t_grid.len()];
    for run in runs {
        let (mt, ov, hits) = run?;
        merge_times.push(mt);
        order_violations += ov;
        for (c, h) in counts.iter_mut().zip(&hits) {
            for (cj, hj) in c.iter_mut().zip(h) {
                *cj += usize::from(*hj);
            }
        }
    }
    let z_lower = normal_upper_quantile(0.025 / m.max(1) as f64);
    let nt = trajectories as f64;
    let upper = t_grid
        .iter()
        .map(|&t| {
            let alive = merge_times.iter().filter(|mt| mt.is_none_or(|x| x > t)).count();
            let (ci_low, ci_high) = wilson(alive, trajectories, Z95);
            TvEstimate { estimate: alive as f64 / nt, ci_low, ci_high }
        })
        .collect();
    let lower = counts
        .iter()
        .map(|c| {
            let best = c
                .iter()
                .enumerate()
                .map(|(j, &cj)| (j, wilson(cj, trajectories, z_lower).0, cj as f64 / nt))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((j, lo, point)) => {
                    LowerBound { bound: lo.max(0.0), point, statistic: Some(j), degenerate: false }
                }
                None => LowerBound { bound: 0.0, point: 0.0, statistic: None, degenerate: true },
            }
        })
        .collect();
    Ok(TvProfile {
        times: t_grid.to_vec(),
        upper,
        lower,
        family,
        trajectories,
        merge_times,
        order_violations,
    })
}

/// Coalescence bound on `‖P^max_t − π‖` at one time.
pub fn tv_upper(p: &ModelParams, t: f64, trajectories: usize, seed: u64) -> Result<TvEstimate, MixingError> {
    Ok(tv_profile(p, &[t], trajectories, seed)?.upper[0])
}

/// Threshold-event lower bound on `‖P^max_t − π‖` at one time.
pub fn tv_lower(p: &ModelParams, t: f64, trajectories: usize, seed: u64) -> Result<LowerBound, MixingError> {
    Ok(tv_profile(p, &[t], trajectories, seed)?.lower[0])
}

/// Worst-start bound `P(mid not merged) + P(ref not merged)` from triple runs
/// with the middle copy started at `min`, with Bonferroni-split Wilson limits.
pub fn tv_upper_worst_start(
    p: &ModelParams,
    t_grid: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<Vec<TvEstimate>, MixingError> {
    check_grid(t_grid)?;
    let t_end = *t_grid.last().expect("nonempty");
    let runs: Vec<Result<TripleRecord, CouplingError>> = par_trajectories(trajectories, seed, |_, rng| {
        simulate_triple(&Configuration::min(p.n()), p, t_end, rng)
    });
    let runs: Vec<TripleRecord> = runs.into_iter().collect::<Result<_, _>>()?;
    let z = normal_upper_quantile(0.025 / 2.0);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let a = runs.iter().filter(|r| r.merge_time_mid.is_none_or(|x| x > t)).count();
            let b = runs.iter().filter(|r| r.merge_time_ref.is_none_or(|x| x > t)).count();
            let (la, ha) = wilson(a, trajectories, z);
            let (lb, hb) = wilson(b, trajectories, z);
            TvEstimate {
                estimate: ((a + b) as f64 / trajectories as f64).min(1.0),
                ci_low: la.max(lb),
                ci_high: (ha + hb).min(1.0),
            }
        })
        .collect())
}

/// Bracket on `t_mix(ε)` read off a grid.
#[derive(Clone, Debug)]
pub struct MixingWindow {
    pub epsilon: f64,
    /// Last grid time whose conservative lower bound is at least `ε` (0 if none).
    pub t_lower: f64,
    /// First grid time whose conservative upper bound is at most `ε`.
    pub t_upper: Option<f64>,
    pub upper_method: &'static str,
    pub lower_method: &'static str,
    pub trajectories: usize,
    pub profile: TvProfile,
}

impl MixingWindow {
    pub fn validate(&self) -> Result<(), MixingError> {
        match self.t_upper {
            Some(tu) if self.t_lower > tu => {
                Err(MixingError::InconsistentWindow { t_lower: self.t_lower, t_upper: tu })
            }
            _ => Ok(()),
        }
    }

    pub fn midpoint(&self) -> Option<f64> {
        self.t_upper.map(|tu| 0.5 * (self.t_lower + tu))
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_lower <= t && self.t_upper.is_some_and(|tu| t <= tu)
    }
}

/// Window from an existing profile. Upper limits are replaced by their
/// running minimum and lower limits by their running maximum from the right;
/// both stay valid because the distance to equilibrium is nonincreasing.
pub fn window_from_profile(profile: TvProfile, epsilon: f64) -> MixingWindow {
    let mut best = f64::INFINITY;
    let mut t_upper = None;
    for (t, u) in profile.times.iter().zip(&profile.upper) {
        best = best.min(u.ci_high);
        if best <= epsilon {
            t_upper = Some(*t);
            break;
        }
    }
    let mut t_lower = 0.0;
    let mut best = 0.0f64;
    for (t, l) in profile.times.iter().zip(&profile.lower).rev() {
        best = best.max(l.bound);
        if best >= epsilon {
            t_lower = *t;
            break;
        }
    }
    MixingWindow {
        epsilon,
        t_lower,
        t_upper,
        upper_method: "coalescence of (max, equilibrium) under the monotone coupling",
        lower_method: "threshold events on single coordinates, Bonferroni over the family",
        trajectories: profile.trajectories,
        profile,
    }
}

pub fn mixing_window(
    p: &ModelParams,
    epsilon: f64,
    t_grid: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<MixingWindow, MixingError> {
    Ok(window_from_profile(tv_profile(p, t_grid, trajectories, seed)?, epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// λ fixed as N grows: compared with the closed-form bracket.
    Fixed,
    /// λ → 0: normalized by `4N/λ`.
    Vanishing,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Fixed => "fixed",
            Regime::Vanishing => "vanishing",
        }
    }
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub lambda: f64,
    pub regime: Regime,
    pub epsilon: f64,
    pub t_lower: f64,
    pub t_upper: Option<f64>,
    pub normalizer: f64,
    pub ratio_low: f64,
    pub ratio_high: Option<f64>,
    /// For the fixed regime: `[(1−s) N/λ, (1+s) t_0]` with slack `s`.
    pub bracket: Option<(f64, f64)>,
    pub order_violations: u64,
}

impl SweepRow {
    pub fn midpoint_ratio(&self) -> Option<f64> {
        self.ratio_high.map(|h| 0.5 * (self.ratio_low + h))
    }

    pub fn within_bracket(&self) -> Option<bool> {
        let (lo, hi) = self.bracket?;
        Some(self.t_lower >= lo && self.t_upper.is_some_and(|t| t <= hi))
    }
}

/// Mixing windows for each `(N, λ, regime)`. Each pair uses the grid
/// `normalizer × fractions` and an independent seed derived from `seed`.
pub fn cutoff_sweep(
    schedule: &[(usize, f64, Regime)],
    epsilon: f64,
    fractions: &[f64],
    trajectories: usize,
    slack: f64,
    seed: u64,
) -> Result<Vec<SweepRow>, MixingError> {
    schedule
        .iter()
        .map(|&(n, lambda, regime)| {
            let p = ModelParams::new(n, lambda, 1.0)?;
            let normalizer = match regime {
                Regime::Vanishing => cutoff_scale(&p),
                Regime::Fixed => t_delta(&p, 0.0)?,
            };
            let grid: Vec<f64> = fractions.iter().map(|f| f * normalizer).collect();
            let s = derive_seed(seed, &format!("sweep/{n}/{lambda}"));
            let w = mixing_window(&p, epsilon, &grid, trajectories, s)?;
            w.validate()?;
            let bracket = (regime == Regime::Fixed)
                .then(|| ((1.0 - slack) * n as f64 / lambda, (1.0 + slack) * normalizer));
            Ok(SweepRow {
                n,
                lambda,
                regime,
                epsilon,
                t_lower: w.t_lower,
                t_upper: w.t_upper,
                normalizer,
                ratio_low: w.t_lower / normalizer,
                ratio_high: w.t_upper.map(|t| t / normalizer),
                bracket,
                order_violations: w.profile.order_violations,
            })
        })
        .collect()
}
