//! The monotone maximal coupling of two ordered copies of the walk, the triple
//! coupling (max, arbitrary start, stationary start) and coalescence records.
//!
//! Every coupled update is built from one primitive: a leader draws `W` from
//! its own interval beta; a follower keeps `W` with probability
//! `min(1, ρ_f(W)/ρ_l(W))` and otherwise draws from its residual law
//! `(ρ_f - ρ_l)_+ / q` by rejection. With the upper copy as leader this is
//! exactly the ν_1/ν_2/ν_3 construction: merge with probability `p = 1 - TV`,
//! shared value from ν_2, and on failure independent draws from ν_1 and ν_3.

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::distributions::{
    BetaParams, BetaSampler, DistError, IntervalBeta, density_crossing, ln_density_ratio, tv_interval_betas,
};
use crate::process::{Configuration, EventSchedule, ModelParams, sample_stationary};
use crate::rng::Rng;
use crate::spectral::twisted_area;
use crate::stats::normal_sf;

/// Trials allowed for one draw of the standalone ν samplers.
pub const MAX_TRIALS: u64 = 1_000_000;

/// Rejection trials for a residual draw before switching to inversion.
const REJECTION_TRIALS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("configurations are not ordered at site {0}")]
    NotOrdered(usize),
    #[error("configurations have different sizes")]
    SizeMismatch,
    #[error("site {0} outside 1..N-1")]
    InvalidSite(usize),
}

/// Draws for a follower given the leader's value `w`. Returns the follower's
/// value and whether it equals `w` by merging.
fn follow<F>(
    params: BetaParams,
    draw_u: &mut F,
    follower: (f64, f64),
    leader: (f64, f64),
    w: f64,
    rng: &mut Rng,
) -> Result<(f64, bool), DistError>
where
    F: FnMut(&mut Rng) -> f64,
{
    let (fl, fr) = follower;
    let (ll, lr) = leader;
    if fl == ll && fr == lr {
        return Ok((w, true));
    }
    if fr <= fl {
        return Ok((fl, fl == w));
    }
    let own = |u: f64| (fl + u * (fr - fl)).min(fr);
    if lr <= ll {
        return Ok((own(draw_u(rng)), false));
    }
    // ln ρ_l(w) - ln ρ_f(w)
    let d = ln_density_ratio(params, fl, fr, ll, lr, w);
    let v: f64 = rng.random();
    if v.ln() < -d {
        return Ok((w, true));
    }
    for _ in 0..REJECTION_TRIALS {
        let x = own(draw_u(rng));
        let d = ln_density_ratio(params, fl, fr, ll, lr, x);
        let v: f64 = rng.random();
        if v.ln() >= d {
            return Ok((x, false));
        }
    }
    // The acceptance rate is the total-variation distance, which can be
    // arbitrarily small; failed trials do not change the target law.
    Ok((residual_by_inversion(params, follower, leader, rng)?, false))
}

/// Draw from the follower's residual law `(ρ_f - ρ_l)_+` by inverting
/// `G(u) = F_f(u) - F_l(u)`, which increases up to the density crossing.
fn residual_by_inversion(
    params: BetaParams,
    follower: (f64, f64),
    leader: (f64, f64),
    rng: &mut Rng,
) -> Result<f64, DistError> {
    let f = IntervalBeta::new(params, follower.0, follower.1)?;
    let l = IntervalBeta::new(params, leader.0, leader.1)?;
    let g = |u: f64| f.cdf(u) - l.cdf(u);
    let (mut lo, mut hi) = (f.left, density_crossing(&f, &l)?);
    // When G(s) rounds to zero the residual mass is below double resolution
    // and any point of [left, s] is as good as another.
    let target = rng.random::<f64>() * g(hi).max(0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One draw of the maximal coupling of two interval betas with common shapes.
/// Returns `(lower value, upper value)`.
pub fn coupled_draw(
    lower: &IntervalBeta,
    upper: &IntervalBeta,
    rng: &mut Rng,
) -> Result<(f64, f64), DistError> {
    if lower.params != upper.params {
        return Err(DistError::ShapeMismatch);
    }
    let sampler = BetaSampler::new(upper.params);
    let mut draw = |rng: &mut Rng| sampler.sample(rng);
    let w = (upper.left + draw(rng) * upper.len()).min(upper.right);
    let (x, _) = follow(
        upper.params,
        &mut draw,
        (lower.left, lower.right),
        (upper.left, upper.right),
        w,
        rng,
    )?;
    Ok((x, w))
}

/// The three laws of the coupling construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nu {
    /// `(ρ_lower - ρ_upper)_+ / q`
    Nu1,
    /// `min(ρ_lower, ρ_upper) / p`
    Nu2,
    /// `(ρ_upper - ρ_lower)_+ / q`
    Nu3,
}

/// Exact draw from one of ν_1, ν_2, ν_3 by accept/reject.
pub fn coupled_resample_sampler(
    nu: Nu,
    lower: &IntervalBeta,
    upper: &IntervalBeta,
    rng: &mut Rng,
) -> Result<f64, DistError> {
    if lower.params != upper.params {
        return Err(DistError::ShapeMismatch);
    }
    let sampler = BetaSampler::new(upper.params);
    // For ν_1 the proposal is the lower law, otherwise the upper law; the
    // acceptance tests use `ln ρ_up - ln ρ_low`.
    for _ in 0..MAX_TRIALS {
        let d = if nu == Nu::Nu1 { lower } else { upper };
        let x = (d.left + sampler.sample(rng) * d.len()).min(d.right);
        let ratio = ln_density_ratio(upper.params, lower.left, lower.right, upper.left, upper.right, x);
        let ln_v = rng.random::<f64>().ln();
        let accept = match nu {
            Nu::Nu1 => ln_v >= ratio,
            Nu::Nu2 => ln_v < -ratio,
            Nu::Nu3 => ln_v >= -ratio,
        };
        if accept {
            return Ok(x);
        }
    }
    Err(DistError::RejectionBudgetExceeded(MAX_TRIALS))
}

/// Two ordered configurations evolving under the coupling.
///
/// The lower copy is stored through its offsets `upper_k - lower_k`, so that
/// differences far below the resolution of the heights themselves survive;
/// `lower` holds the rounded heights for observation.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub upper: Configuration,
    pub lower: Configuration,
    pub offsets: Vec<f64>,
    pub merged_sites: Vec<bool>,
    merged_count: usize,
    pub fully_merged: bool,
    /// Sites found with `lower_k > upper_k` after an update.
    pub order_violations: u64,
}

impl CoupledState {
    pub fn new(upper: Configuration, lower: Configuration) -> Result<Self, CouplingError> {
        if upper.n() != lower.n() {
            return Err(CouplingError::SizeMismatch);
        }
        if let Some(k) = (0..=upper.n()).find(|&k| lower.heights[k] > upper.heights[k]) {
            return Err(CouplingError::NotOrdered(k));
        }
        let offsets: Vec<f64> = upper.heights.iter().zip(&lower.heights).map(|(a, b)| a - b).collect();
        let merged_sites: Vec<bool> = offsets.iter().map(|d| *d == 0.0).collect();
        let merged_count = merged_sites.iter().filter(|m| **m).count();
        let fully_merged = merged_count == merged_sites.len();
        Ok(Self { upper, lower, offsets, merged_sites, merged_count, fully_merged, order_violations: 0 })
    }

    pub fn n(&self) -> usize {
        self.upper.n()
    }

    fn set(&mut self, k: usize, up: f64, offset: f64) {
        self.upper.heights[k] = up;
        self.lower.heights[k] = up - offset;
        self.offsets[k] = offset;
        if offset < 0.0 {
            self.order_violations += 1;
        }
        let now = offset == 0.0;
        if now != self.merged_sites[k] {
            self.merged_sites[k] = now;
            if now {
                self.merged_count += 1;
            } else {
                self.merged_count -= 1;
            }
        }
        self.fully_merged = self.merged_count == self.merged_sites.len();
    }
}

fn site_interval(c: &Configuration, k: usize) -> (f64, f64) {
    (c.heights[k - 1], c.heights[k + 1])
}

/// Shape sum from which a coupled update uses the Gaussian limit of the beta
/// law. The limit is off by about `(a + b)^{-1/2}` in total variation, while
/// a double-precision draw cannot resolve a standard deviation this small.
pub const GAUSSIAN_SHAPE_SUM: f64 = 1.152_921_504_606_847e18; // 2^60

/// Largest `|L' / L - 1|` handled in the Gaussian limit. Beyond it the two
/// laws are thousands of standard deviations apart and the plain update,
/// which then never merges, is exact to double precision.
const GAUSSIAN_SCALE_GAP: f64 = 9.5367431640625e-7; // 2^-20

/// Applies one coupled resampling at site `k`.
///
/// Positions are taken relative to the upper copy's left neighbour: the
/// upper interval is `[0, L]` and the lower one `[-d_{k-1}, L - d_{k+1}]`.
pub fn coupled_resample(
    s: &mut CoupledState,
    k: usize,
    p: &ModelParams,
    rng: &mut Rng,
) -> Result<(), CouplingError> {
    if k == 0 || k >= s.n() {
        return Err(CouplingError::InvalidSite(k));
    }
    let sampler = p.sampler(k);
    let params = p.site_params(k);
    let (a, b) = site_interval(&s.upper, k);
    let len = b - a;
    let (dl, dr) = (s.offsets[k - 1], s.offsets[k + 1]);
    let (w, offset) = if dl == 0.0 && dr == 0.0 {
        ((a + sampler.sample(rng) * len).min(b), 0.0)
    } else if params.a() + params.b() >= GAUSSIAN_SHAPE_SUM 
        && len > 0.0
        && (dl - dr).abs() <= GAUSSIAN_SCALE_GAP * len
    {
        let (w_rel, offset) = gaussian_follow(params, len, dl, dr, rng);
        ((a + w_rel).min(b), offset)
    } else {
        let mut draw = |rng: &mut Rng| sampler.sample(rng);
        let w_rel = (draw(rng) * len).min(len);
        let (x_rel, _) = follow(params, &mut draw, (-dl, len - dr), (0.0, len), w_rel, rng)?;
        ((a + w_rel).min(b), w_rel - x_rel)
    };
    s.set(k, w, offset);
    Ok(())
}

/// The coupled update in the Gaussian limit, in units of the upper copy's
/// standard deviation `σ = s L`: the upper law is `N(0, 1)` and the lower one
/// `N(-δ, c²)` with `δ σ = (1 - m) d_l + m d_r` and `c = 1 + (d_l - d_r)/L`.
/// Returns the upper position relative to its left end and the new offset.
fn gaussian_follow(params: BetaParams, len: f64, dl: f64, dr: f64, rng: &mut Rng) -> (f64, f64) {
    let n = params.a() + params.b();
    let m = params.a() / n;
    let sd = (m * (1.0 - m) / (n + 1.0)).sqrt();
    let sigma = sd * len;
    let delta = ((1.0 - m) * dl + m * dr) / sigma;
    let c_minus_1 = (dl - dr) / len;
    let c = 1.0 + c_minus_1;
    let ln_c = c_minus_1.ln_1p();
    // ln φ_lower(z) - ln φ_upper(z)
    let lr = |z: f64| {
        let y = (z + delta) / c;
        0.5 * (z - y) * (z + y) - ln_c
    };
    let zu: f64 = rng.sample(StandardNormal);
    let w_rel = len * (m + sd * zu);
    if rng.random::<f64>().ln() < lr(zu) {
        return (w_rel, 0.0);
    }
    // Crossing of the two densities between the means; the other root lies
    // about 1/sd standard deviations out.
    let big = delta * delta + 2.0 * c * c * ln_c;
    let disc = (delta * delta + c_minus_1 * (2.0 + c_minus_1) * big).max(0.0);
    let cross = -big / (delta + disc.sqrt());
    let zl = 'draw: {
        for _ in 0..REJECTION_TRIALS {
            let z = -delta + c * rng.sample::<f64, _>(StandardNormal);
            if z < cross && rng.random::<f64>() < -(-lr(z)).exp_m1() {
                break 'draw z;
            }
        }
        // G(z) = Φ((z + δ)/c) - Φ(z) increases up to the crossing.
        let g = |z: f64| normal_sf(z) - normal_sf((z + delta) / c);
        let (mut lo, mut hi) = (-delta - 40.0 * c, cross);
        let target = rng.random::<f64>() * g(hi).max(0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (w_rel, sigma * (zu - zl))
}

/// Outcome of a coupled run.
#[derive(Clone, Debug)]
pub struct CoalescenceRecord {
    pub merge_time: Option<f64>,
    /// First time each site coincided in both copies (`Some(0)` if it did initially).
    pub site_merge_times: Vec<Option<f64>>,
    /// `(t, twisted area)` at each observation time.
    pub area: Vec<(f64, f64)>,
    pub order_violations: u64,
    pub events: u64,
    pub final_state: CoupledState,
}

/// Runs the coupling from `(upper0, lower0)` until `t_end`, or until full
/// merge when `stop_at_merge` is set. `observe(i, t, state)` fires at each
/// `obs_times[i]` reached.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled<O>(
    upper0: &Configuration,
    lower0: &Configuration,
    p: &ModelParams,
    t_end: f64,
    obs_times: &[f64],
    stop_at_merge: bool,
    rng: &mut Rng,
    mut observe: O,
) -> Result<CoalescenceRecord, CouplingError>
where
    O: FnMut(usize, f64, &CoupledState),
{
    let mut s = CoupledState::new(upper0.clone(), lower0.clone())?;
    let mut site_merge_times: Vec<Option<f64>> =
        s.merged_sites.iter().map(|m| m.then_some(0.0)).collect();
    let mut merge_time = s.fully_merged.then_some(0.0);
    let mut area = Vec::with_capacity(obs_times.len());
    let sched = EventSchedule::new(p.n());
    let mut t = 0.0;
    let mut next_obs = 0;
    let mut events = 0;
    let mut emit = |s: &CoupledState, i: usize, t: f64, area: &mut Vec<(f64, f64)>| {
        let a = if s.fully_merged { 0.0 } else { twisted_area(&s.upper, &s.lower, p) };
        area.push((t, a));
        observe(i, t, s);
    };
    loop {
        if stop_at_merge && s.fully_merged {
            break;
        }
        let (dt, k) = sched.next(rng);
        let t_next = t + dt;
        while next_obs < obs_times.len() && obs_times[next_obs] < t_next && obs_times[next_obs] <= t_end {
            emit(&s, next_obs, obs_times[next_obs], &mut area);
            next_obs += 1;
        }
        if t_next > t_end {
            break;
        }
        t = t_next;
        coupled_resample(&mut s, k, p, rng)?;
        events += 1;
        if s.merged_sites[k] && site_merge_times[k].is_none() {
            site_merge_times[k] = Some(t);
        }
        if s.fully_merged && merge_time.is_none() {
            merge_time = Some(t);
        }
    }
    // After a stop at merge the configurations stay equal; the area is zero.
    while next_obs < obs_times.len() && obs_times[next_obs] <= t_end {
        emit(&s, next_obs, obs_times[next_obs], &mut area);
        next_obs += 1;
    }
    Ok(CoalescenceRecord {
        merge_time,
        site_merge_times,
        area,
        order_violations: s.order_violations,
        events,
        final_state: s,
    })
}

/// `q`, `Q` and `q / (r^{k/2} Q)` at site `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QDiagnostic {
    pub q: f64,
    pub big_q: f64,
    pub ratio_over_rk2: f64,
    /// `Q = 0` while `q > 0`.
    pub anomaly: bool,
}

pub fn q_diagnostic(s: &CoupledState, k: usize, p: &ModelParams) -> Result<QDiagnostic, CouplingError> {
    if k == 0 || k >= s.n() {
        return Err(CouplingError::InvalidSite(k));
    }
    let params = p.site_params(k);
    let (ul, ur) = site_interval(&s.upper, k);
    let (ll, lr) = site_interval(&s.lower, k);
    let q = if ul == ll && ur == lr {
        0.0
    } else if ur <= ul || lr <= ll {
        1.0
    } else {
        tv_interval_betas(&IntervalBeta::new(params, ll, lr)?, &IntervalBeta::new(params, ul, ur)?)?
    };
    let lambda = p.lambda();
    let mean = |l: f64, r: f64| 0.5 * (1.0 + lambda) * l + 0.5 * (1.0 - lambda) * r;
    let delta_bar = mean(ul, ur) - mean(ll, lr);
    let len = (ur - ul).max(lr - ll);
    let big_q = if delta_bar == 0.0 { 0.0 } else { delta_bar / len };
    let (ratio, anomaly) = if big_q > 0.0 {
        ((q.ln() - 0.5 * k as f64 * p.ln_r() - big_q.ln()).exp(), false)
    } else {
        (0.0, q > 0.0)
    };
    Ok(QDiagnostic { q, big_q, ratio_over_rk2: ratio, anomaly })
}

/// Top from max, mid from an arbitrary start, ref from equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleState {
    pub top: Configuration,
    pub mid: Configuration,
    pub reference: Configuration,
    pub order_violations: u64,
}

impl TripleState {
    fn apply(&mut self, k: usize, p: &ModelParams, rng: &mut Rng) -> Result<(), DistError> {
        let sampler = p.sampler(k);
        let params = p.site_params(k);
        let mut draw = |rng: &mut Rng| sampler.sample(rng);
        let top = site_interval(&self.top, k);
        let w = (top.0 + draw(rng) * (top.1 - top.0)).min(top.1);
        // mid and ref are conditionally independent given the top's draw.
        let (m, _) = follow(params, &mut draw, site_interval(&self.mid, k), top, w, rng)?;
        let (r, _) = follow(params, &mut draw, site_interval(&self.reference, k), top, w, rng)?;
        self.top.heights[k] = w;
        self.mid.heights[k] = m;
        self.reference.heights[k] = r;
        self.order_violations += u64::from(m > w) + u64::from(r > w);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TripleRecord {
    pub merge_time_mid: Option<f64>,
    pub merge_time_ref: Option<f64>,
    pub order_violations: u64,
    pub final_state: TripleState,
}

impl TripleRecord {
    /// Time by which both pairs have merged.
    pub fn both_merged(&self) -> Option<f64> {
        Some(self.merge_time_mid?.max(self.merge_time_ref?))
    }
}

/// Runs the triple coupling to `t_end` or until both pairs have merged.
pub fn simulate_triple(
    x0: &Configuration,
    p: &ModelParams,
    t_end: f64,
    rng: &mut Rng,
) -> Result<TripleRecord, CouplingError> {
    let n = p.n();
    if x0.n() != n {
        return Err(CouplingError::SizeMismatch);
    }
    let reference = sample_stationary(p, rng);
    let mut s = TripleState { top: Configuration::max(n), mid: x0.clone(), reference, order_violations: 0 };
    let diff = |a: &Configuration, b: &Configuration| {
        a.heights.iter().zip(&b.heights).filter(|(x, y)| x != y).count()
    };
    let mut mid_diff = diff(&s.top, &s.mid);
    let mut ref_diff = diff(&s.top, &s.reference);
    let mut merge_time_mid = (mid_diff == 0).then_some(0.0);
    let mut merge_time_ref = (ref_diff == 0).then_some(0.0);
    let sched = EventSchedule::new(n);
    let mut t = 0.0;
    while merge_time_mid.is_none() || merge_time_ref.is_none() {
        let (dt, k) = sched.next(rng);
        t += dt;
        if t > t_end {
            break;
        }
        let before = (s.top.heights[k] != s.mid.heights[k], s.top.heights[k] != s.reference.heights[k]);
        s.apply(k, p, rng)?;
        let after = (s.top.heights[k] != s.mid.heights[k], s.top.heights[k] != s.reference.heights[k]);
        mid_diff = mid_diff + usize::from(after.0) - usize::from(before.0);
        ref_diff = ref_diff + usize::from(after.1) - usize::from(before.1);
        if mid_diff == 0 && merge_time_mid.is_none() {
            merge_time_mid = Some(t);
        }
        if ref_diff == 0 && merge_time_ref.is_none() {
            merge_time_ref = Some(t);
        }
    }
    Ok(TripleRecord {
        merge_time_mid,
        merge_time_ref,
        order_violations: s.order_violations,
        final_state: s,
    })
}
