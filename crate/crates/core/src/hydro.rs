//! Hydrodynamic limits: the transform `T`, the Lax solution `S`, the monotone
//! schemes `H_X`, `H_M` and the naive linear scheme, their RK4 integration,
//! barrier profiles and comparison checks, and the Monte Carlo profiles.
//!
//! Scheme time is rescaled: scheme time `t` is real time `t N / λ`.

use rand::Rng as _;
use thiserror::Error;

use crate::process::{
    Configuration, ModelParams, MuSchedule, ProcessError, simulate_x, simulate_x_and_m,
};
use crate::rng::{Rng, par_trajectories};
use crate::spectral::{EigenSystem, mean_profile_uniformized};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydroError {
    #[error("height {0} outside [0, N]")]
    Domain(f64),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("time step {dt:.3e} exceeds the stability bound {max:.3e}")]
    InvalidStep { dt: f64, max: f64 },
    #[error("integration left [-0.1, 1.1] at t = {t}, site {k} (value {value})")]
    StepTooLarge { t: f64, k: usize, value: f64 },
    #[error("profile contains non-finite values")]
    NonFinite,
    #[error("regime check failed: {0}")]
    Regime(String),
}

/// `T(u) = -(1/N) log_r(u/a_N + r^{-N})`, mapping `[0, N]` onto `[0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct Transform {
    ln_a_n: f64,
    n_ln_r: f64,
    n: f64,
}

impl Transform {
    pub fn new(p: &ModelParams) -> Result<Self, HydroError> {
        Ok(Self { ln_a_n: p.ln_a_n()?, n_ln_r: p.n() as f64 * p.ln_r(), n: p.n() as f64 })
    }

    pub fn apply(&self, u: f64) -> Result<f64, HydroError> {
        if !(0.0..=self.n).contains(&u) {
            return Err(HydroError::Domain(u));
        }
        Ok(self.apply_unchecked(u))
    }

    #[inline]
    pub fn apply_unchecked(&self, u: f64) -> f64 {
        if u >= self.n {
            return 0.0;
        }
        let a = u.ln() - self.ln_a_n;
        let b = -self.n_ln_r;
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        (-lse / self.n_ln_r).clamp(0.0, 1.0)
    }

    /// `T'(u) = -1 / (N log r · (u + a_N r^{-N}))`.
    pub fn derivative(&self, u: f64) -> f64 {
        -1.0 / (self.n_ln_r * (u + (self.ln_a_n - self.n_ln_r).exp()))
    }

    /// `T⁻¹(f) = a_N r^{-Nf} (1 - r^{-N(1-f)})`.
    pub fn invert(&self, f: f64) -> f64 {
        (self.ln_a_n - self.n_ln_r * f).exp() * -(-self.n_ln_r * (1.0 - f)).exp_m1()
    }
}

/// `S(x,t) = min(1 - x, ((t - x)_+)² / 4t)`, with `S(x, 0) = 0`.
pub fn lax_solution(x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let d = (t - x).max(0.0);
    (1.0 - x).min(d * d / (4.0 * t))
}

/// Values on `{k/N}` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct GridProfile {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeKind {
    X,
    M(MuSchedule),
    Naive,
}

#[inline]
fn edge_expm1(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        let e = x.exp_m1();
        (e, if e.is_finite() { -e / (1.0 + e) } else { -1.0 })
    } else {
        let e = (-x).exp_m1();
        (if e.is_finite() { -e / (1.0 + e) } else { -1.0 }, e)
    }
}

/// `H_X(x, y, z)`.
pub fn h_x(p: &ModelParams, x: f64, y: f64, z: f64) -> f64 {
    let c = p.n() as f64 * p.ln_r();
    let lambda = p.lambda();
    let ea = edge_expm1(c * (y - x)).0;
    let eb = edge_expm1(c * (y - z)).0;
    (0.5 * (1.0 + lambda) * ea + 0.5 * (1.0 - lambda) * eb) / (lambda * p.ln_r())
}

/// `ln(a e^A + b e^B)` with `a + b = 1`, accurate when both exponents are small.
#[inline]
fn ln_mix(a: f64, ea: f64, big_a: f64, eb: f64, big_b: f64) -> f64 {
    let b = 1.0 - a;
    let s = a * ea + b * eb;
    if s.is_finite() && s > -0.5 {
        return s.ln_1p();
    }
    let la = a.ln() + big_a;
    let lb = if b > 0.0 { b.ln() + big_b } else { f64::NEG_INFINITY };
    let m = la.max(lb);
    m + ((la - m).exp() + (lb - m).exp()).ln()
}

/// `H_M(x, y, z, k)`.
pub fn h_m(p: &ModelParams, mu: &MuSchedule, k: usize, x: f64, y: f64, z: f64) -> f64 {
    let c = p.n() as f64 * p.ln_r();
    let a = mu.left_weight(k, p.lambda());
    let (big_a, big_b) = (c * (y - x), c * (y - z));
    let v = ln_mix(a, edge_expm1(big_a).0, big_a, edge_expm1(big_b).0, big_b);
    v / (p.lambda() * p.ln_r())
}

/// `H(x, y, z) = -(N/λ)((1+λ)/2 (x-y) + (1-λ)/2 (z-y))`.
pub fn h_naive(p: &ModelParams, x: f64, y: f64, z: f64) -> f64 {
    let lambda = p.lambda();
    -(p.n() as f64 / lambda) * (0.5 * (1.0 + lambda) * (x - y) + 0.5 * (1.0 - lambda) * (z - y))
}

/// Time derivative `-H(f_{k-1}, f_k, f_{k+1})` at interior sites, zero at the ends.
pub fn scheme_rhs(kind: &SchemeKind, f: &[f64], p: &ModelParams) -> Result<Vec<f64>, HydroError> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(HydroError::NonFinite);
    }
    p.require_asymmetric()?;
    let mut out = vec![0.0; f.len()];
    let mut edges = Vec::new();
    scheme_rhs_into(kind, f, p, &mut edges, &mut out);
    Ok(out)
}

fn scheme_rhs_into(
    kind: &SchemeKind,
    f: &[f64],
    p: &ModelParams,
    edges: &mut Vec<(f64, f64)>,
    out: &mut [f64],
) {
    let n = p.n();
    let lambda = p.lambda();
    let c = n as f64 * p.ln_r();
    let scale = 1.0 / (lambda * p.ln_r());
    match kind {
        SchemeKind::Naive => {
            for k in 1..n {
                out[k] = -h_naive(p, f[k - 1], f[k], f[k + 1]);
            }
        }
        SchemeKind::X => {
            edges.clear();
            edges.extend((0..=n).map(|j| if j == 0 { (0.0, 0.0) } else { edge_expm1(c * (f[j] - f[j - 1])) }));
            let (wl, wr) = (0.5 * (1.0 + lambda), 0.5 * (1.0 - lambda));
            for k in 1..n {
                out[k] = -(wl * edges[k].0 + wr * edges[k + 1].1) * scale;
            }
        }
        SchemeKind::M(mu) => {
            edges.clear();
            edges.extend((0..=n).map(|j| if j == 0 { (0.0, 0.0) } else { edge_expm1(c * (f[j] - f[j - 1])) }));
            for k in 1..n {
                let a = mu.left_weight(k, lambda);
                let big_a = c * (f[k] - f[k - 1]);
                let big_b = c * (f[k] - f[k + 1]);
                out[k] = -ln_mix(a, edges[k].0, big_a, edges[k + 1].1, big_b) * scale;
            }
        }
    }
    out[0] = 0.0;
    out[n] = 0.0;
}

/// Initial profile of each scheme in its own coordinates.
pub fn initial_profile(kind: &SchemeKind, p: &ModelParams) -> Vec<f64> {
    let n = p.n();
    match kind {
        SchemeKind::X => (0..=n).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
        // T(M(0)): 1 strictly below k0, so the profile is a sub-solution and
        // the trajectory is nondecreasing in time.
        SchemeKind::M(mu) => (0..=n).map(|k| if k < mu.k0.max(1) { 1.0 } else { 0.0 }).collect(),
        SchemeKind::Naive => (0..=n).map(|k| if k == 0 { 0.0 } else { 1.0 }).collect(),
    }
}

/// Default step `0.05 λ / N`.
pub fn default_dt(p: &ModelParams) -> f64 {
    0.05 * p.lambda() / p.n() as f64
}

/// Classical RK4 in scheme time with the end values held fixed. Profiles are
/// stored at `t = 0`, every `store_every`, and at `t_end`.
pub fn integrate_scheme(
    kind: &SchemeKind,
    initial: &[f64],
    p: &ModelParams,
    t_end: f64,
    dt: f64,
    store_every: f64,
) -> Result<Vec<GridProfile>, HydroError> {
    p.require_asymmetric()?;
    let max_dt = 0.1 * p.lambda() / p.n() as f64;
    if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
        return Err(HydroError::InvalidStep { dt, max: max_dt });
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(HydroError::NonFinite);
    }
    let len = initial.len();
    let steps = (t_end / dt).ceil().max(0.0) as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let stride = ((store_every / h).round() as usize).max(1);
    let mut f = initial.to_vec();
    let mut out = vec![GridProfile { time: 0.0, values: f.clone() }];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut tmp = vec![0.0; len];
    let mut edges = Vec::with_capacity(len);
    for step in 1..=steps {
        scheme_rhs_into(kind, &f, p, &mut edges, &mut k1);
        for i in 0..len {
            tmp[i] = f[i] + 0.5 * h * k1[i];
        }
        scheme_rhs_into(kind, &tmp, p, &mut edges, &mut k2);
        for i in 0..len {
            tmp[i] = f[i] + 0.5 * h * k2[i];
        }
        scheme_rhs_into(kind, &tmp, p, &mut edges, &mut k3);
        for i in 0..len {
            tmp[i] = f[i] + h * k3[i];
        }
        scheme_rhs_into(kind, &tmp, p, &mut edges, &mut k4);
        for i in 0..len {
            f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * h;
        if let Some((k, &value)) =
            f.iter().enumerate().find(|(_, v)| !(-0.1..=1.1).contains(*v))
        {
            return Err(HydroError::StepTooLarge { t, k, value });
        }
        if step % stride == 0 || step == steps {
            out.push(GridProfile { time: t, values: f.clone() });
        }
    }
    Ok(out)
}

/// `f_X(k/N, t) = T(E[X^max_k(tN/λ)])` at each scheme time, from the modal
/// solution of the mean ODE.
pub fn exact_fx(p: &ModelParams, times: &[f64]) -> Result<Vec<GridProfile>, HydroError> {
    let tr = Transform::new(p)?;
    let es = EigenSystem::new(p);
    let coeffs = es.coefficients(&Configuration::max(p.n()));
    let scale = p.n() as f64 / p.lambda();
    Ok(times
        .iter()
        .map(|&t| {
            let n = p.n() as f64;
            let m = if t == 0.0 { Configuration::max(p.n()).heights } else { es.mean_profile(&coeffs, t * scale) };
            GridProfile { time: t, values: m.iter().map(|&u| tr.apply_unchecked(u.clamp(0.0, n))).collect() }
        })
        .collect())
}

/// Same as [`exact_fx`] but by uniformization of the mean ODE.
pub fn exact_fx_uniformized(p: &ModelParams, times: &[f64]) -> Result<Vec<GridProfile>, HydroError> {
    let tr = Transform::new(p)?;
    let scale = p.n() as f64 / p.lambda();
    let real: Vec<f64> = times.iter().map(|t| t * scale).collect();
    let means = mean_profile_uniformized(&Configuration::max(p.n()), p, &real);
    Ok(times
        .iter()
        .zip(means)
        .map(|(&t, m)| GridProfile { time: t, values: m.iter().map(|&u| tr.apply_unchecked(u)).collect() })
        .collect())
}

/// `max_{k/N ∈ [eps, 1]} |f_k - S(k/N, t)|`.
pub fn sup_distance(profile: &GridProfile, eps: f64) -> f64 {
    let n = (profile.values.len() - 1) as f64;
    profile
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| *k as f64 / n >= eps - 1e-12)
        .map(|(k, v)| (v - lax_solution(k as f64 / n, profile.time)).abs())
        .fold(0.0, f64::max)
}

/// First place where `sub` exceeds `sup` by more than `tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub k: usize,
    pub sub: f64,
    pub sup: f64,
}

/// Pointwise ordering `sub ≤ sup + tol` at every stored time.
pub fn comparison_check(sub: &[GridProfile], sup: &[GridProfile], tol: f64) -> Result<(), Violation> {
    assert_eq!(sub.len(), sup.len(), "trajectories must share time stamps");
    for (a, b) in sub.iter().zip(sup) {
        debug_assert!((a.time - b.time).abs() <= 1e-12 * a.time.max(1.0));
        for (k, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
            if *x > y + tol {
                return Err(Violation { time: a.time, k, sub: *x, sup: *y });
            }
        }
    }
    Ok(())
}

/// `f(k/N, ·)` nondecreasing between consecutive stored times (up to `tol`).
pub fn time_monotone(traj: &[GridProfile], tol: f64) -> Result<(), Violation> {
    for w in traj.windows(2) {
        for (k, (a, b)) in w[0].values.iter().zip(&w[1].values).enumerate() {
            if *b < a - tol {
                return Err(Violation { time: w[1].time, k, sub: *a, sup: *b });
            }
        }
    }
    Ok(())
}

/// Builds a trajectory of constant-in-time or closed-form profiles on the
/// time stamps of `like`.
pub fn profile_on(like: &[GridProfile], n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<GridProfile> {
    like.iter()
        .map(|g| GridProfile {
            time: g.time,
            values: (0..=n).map(|k| f(k as f64 / n as f64, g.time)).collect(),
        })
        .collect()
}

/// `c_N = 1/(1 - k0/N)`.
pub fn c_n(p: &ModelParams, mu: &MuSchedule) -> f64 {
    1.0 / (1.0 - mu.k0 as f64 / p.n() as f64)
}

/// Super-solution of the M-scheme: 1 below `k0/N`, `c_N(1-x)` above.
pub fn v_m(p: &ModelParams, mu: &MuSchedule, x: f64) -> f64 {
    if x < mu.k0 as f64 / p.n() as f64 { 1.0 } else { c_n(p, mu) * (1.0 - x) }
}

/// `-x²/(16-4t) - x/2 + t/4`, an exact solution of the limiting equation.
pub fn barrier_base(x: f64, t: f64) -> f64 {
    -x * x / (16.0 - 4.0 * t) - 0.5 * x + 0.25 * t
}

/// `max(λ, 1/(Nλ))`.
pub fn consistency_scale(p: &ModelParams) -> f64 {
    p.lambda().max(1.0 / (p.n() as f64 * p.lambda()))
}

/// Sub-solution barrier `barrier_base(x,t) - C max(λ, 1/(Nλ)) t`.
pub fn sub_barrier(p: &ModelParams, c: f64, x: f64, t: f64) -> f64 {
    barrier_base(x, t) - c * consistency_scale(p) * t
}

/// Smallest `C ≥ 0` for which the barrier is a sub-solution of the scheme on
/// the grid `k = 1..N-1`, `t ∈ {0, dt, …, t_max}`:
/// `∂_t f + H(f_{k-1}, f_k, f_{k+1}) ≤ C max(λ, 1/(Nλ))`.
pub fn calibrate_barrier_constant(kind: &SchemeKind, p: &ModelParams, t_max: f64, t_steps: usize) -> f64 {
    let n = p.n();
    let nf = n as f64;
    let eps = consistency_scale(p);
    let mut worst: f64 = 0.0;
    for i in 0..=t_steps {
        let t = t_max * i as f64 / t_steps as f64;
        let f: Vec<f64> = (0..=n).map(|k| barrier_base(k as f64 / nf, t)).collect();
        for k in 1..n {
            let x = k as f64 / nf;
            let dt_f = 0.25 - 4.0 * x * x / ((16.0 - 4.0 * t) * (16.0 - 4.0 * t));
            let h = match kind {
                SchemeKind::X => h_x(p, f[k - 1], f[k], f[k + 1]),
                SchemeKind::M(mu) => h_m(p, mu, k, f[k - 1], f[k], f[k + 1]),
                SchemeKind::Naive => h_naive(p, f[k - 1], f[k], f[k + 1]),
            };
            worst = worst.max((dt_f + h) / eps);
        }
    }
    worst
}

/// Naive barriers `(f_-, f_+)` at time `t` on `k = 0..=N`.
pub fn barrier_profiles_naive(p: &ModelParams, t: f64) -> Result<(GridProfile, GridProfile), HydroError> {
    p.require_asymmetric()?;
    let n = p.n();
    let nl = n as f64 * p.lambda();
    let w = nl.powf(-1.0 / 3.0);
    let s = nl.powf(2.0 / 3.0);
    let minus = (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            let d = (t - x + w).max(0.0);
            1.0 - s * d * d - t * w
        })
        .collect();
    let plus = (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            let d = (x + w - t).max(0.0);
            s * d * d + t * w
        })
        .collect();
    Ok((GridProfile { time: t, values: minus }, GridProfile { time: t, values: plus }))
}

/// Exact `u^N(k/N, t) = E[X^max_k(tN/λ)]/N`.
pub fn naive_mean_profile(p: &ModelParams, t: f64) -> Vec<f64> {
    let real = t * p.n() as f64 / p.lambda();
    let m = mean_profile_uniformized(&Configuration::max(p.n()), p, &[real]);
    m[0].iter().map(|v| v / p.n() as f64).collect()
}

/// `T(Ê[X^max_k])` at each scheme time with a delta-method standard error,
/// from `trajectories` runs of the walk. No regime restriction.
pub fn empirical_t_of_mean(
    p: &ModelParams,
    times: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<Vec<(GridProfile, Vec<f64>)>, HydroError> {
    let tr = Transform::new(p)?;
    let n = p.n();
    let nf = n as f64;
    let scale = nf / p.lambda();
    let real: Vec<f64> = times.iter().map(|t| t * scale).collect();
    let t_end = real.last().copied().unwrap_or(0.0);
    let snaps: Vec<Vec<Vec<f64>>> = par_trajectories(trajectories, seed, |_, rng| {
        let mut out = vec![Vec::new(); real.len()];
        let last = simulate_x(&Configuration::max(n), p, t_end, &real, rng, |i, _, c| {
            out[i] = c.heights.clone();
        });
        for o in out.iter_mut().filter(|o| o.is_empty()) {
            *o = last.heights.clone();
        }
        out
    });
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (values, se): (Vec<f64>, Vec<f64>) = (0..=n)
                .map(|k| {
                    let xs: Vec<f64> = snaps.iter().map(|s| s[i][k]).collect();
                    let (m, se) = crate::stats::mean_se(&xs);
                    let se = if se.is_finite() { se } else { 0.0 };
                    (tr.apply_unchecked(m.clamp(0.0, nf)), tr.derivative(m.clamp(0.0, nf)).abs() * se)
                })
                .unzip();
            (GridProfile { time: t, values }, se)
        })
        .collect())
}

/// Monte Carlo view of `g_N(x,t) = X^max_{⌊xN⌋}(tN/λ)/N`.
#[derive(Clone, Debug)]
pub struct FrontStats {
    pub x_grid: Vec<f64>,
    /// `g[trajectory][i]` at `x_grid[i]`.
    pub g: Vec<Vec<f64>>,
    pub g_mean: Vec<f64>,
    /// `Ê[x_k]/N` for `k = 0..=N`.
    pub mean_profile: Vec<f64>,
    pub mean_profile_se: Vec<f64>,
    /// First grid point where the mean of `g` reaches 1/2.
    pub step_location: Option<f64>,
}

/// Requires `λN ≥ 20`.
pub fn naive_front(
    p: &ModelParams,
    t: f64,
    x_grid: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<FrontStats, HydroError> {
    p.require_asymmetric()?;
    let n = p.n();
    if (n as f64) * p.lambda() < 20.0 {
        return Err(HydroError::Regime(format!("λN = {} < 20", n as f64 * p.lambda())));
    }
    let real = t * n as f64 / p.lambda();
    let finals: Vec<Configuration> = par_trajectories(trajectories, seed, |_, rng| {
        simulate_x(&Configuration::max(n), p, real, &[], rng, |_, _, _| {})
    });
    let nf = n as f64;
    let g: Vec<Vec<f64>> = finals
        .iter()
        .map(|c| x_grid.iter().map(|x| c.heights[(x * nf).floor() as usize] / nf).collect())
        .collect();
    let g_mean: Vec<f64> = (0..x_grid.len())
        .map(|i| g.iter().map(|row| row[i]).sum::<f64>() / trajectories as f64)
        .collect();
    let mut mean_profile = Vec::with_capacity(n + 1);
    let mut mean_profile_se = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let xs: Vec<f64> = finals.iter().map(|c| c.heights[k] / nf).collect();
        let (m, se) = crate::stats::mean_se(&xs);
        mean_profile.push(m);
        mean_profile_se.push(if se.is_finite() { se } else { 0.0 });
    }
    let step_location = x_grid.iter().zip(&g_mean).find(|(_, m)| **m >= 0.5).map(|(x, _)| *x);
    Ok(FrontStats { x_grid: x_grid.to_vec(), g, g_mean, mean_profile, mean_profile_se, step_location })
}

/// Maximal central-difference residual of `∂_t S + ∂_x S + (∂_x S)²` at `points`.
pub fn pde_residual_s(points: &[(f64, f64)], h: f64) -> f64 {
    points
        .iter()
        .map(|&(x, t)| {
            let st = (lax_solution(x, t + h) - lax_solution(x, t - h)) / (2.0 * h);
            let sx = (lax_solution(x + h, t) - lax_solution(x - h, t)) / (2.0 * h);
            (st + sx + sx * sx).abs()
        })
        .fold(0.0, f64::max)
}

/// Distance from `(x, t)` to the set where `S` fails to be smooth: the
/// interface `1 - x = (t-x)²/4t`, the line `x = t`, and the boundary of
/// `(0,1) × (0, ∞)`.
pub fn distance_to_singular_set(x: f64, t: f64) -> f64 {
    // Interface: (t - x)² = 4t(1 - x) with x < t, i.e. x = t - 2√t·√(1 - … ),
    // solved as x = 2√t - t for t ≤ 4 (the root with x ≤ t).
    let interface = if t <= 4.0 {
        let xi = 2.0 * t.sqrt() - t;
        ((x - xi).abs() / (1.0 + (1.0 / t.sqrt() - 1.0).powi(2)).sqrt()).min(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let diag = (x - t).abs() / std::f64::consts::SQRT_2;
    interface.min(diag).min(x).min(1.0 - x).min(t)
}

/// `count` points of `(0,1) × (0, 4.5)` at distance at least `margin` from the
/// singular set, drawn uniformly by rejection.
pub fn smooth_interior_points(count: usize, margin: f64, rng: &mut Rng) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: f64 = rng.random();
        let t: f64 = 4.5 * rng.random::<f64>();
        if distance_to_singular_set(x, t) >= margin {
            out.push((x, t));
        }
    }
    out
}

/// Monte Carlo transformed profiles at scheme time `t`.
#[derive(Clone, Debug)]
pub struct EmpiricalProfiles {
    pub time: f64,
    /// `Ê[T(X^max_k)]`.
    pub mean_tx: Vec<f64>,
    pub se_tx: Vec<f64>,
    /// `T(Ê[X^max_k])`.
    pub t_mean_x: Vec<f64>,
    /// `Ê[T(M_k)]`.
    pub mean_tm: Vec<f64>,
    pub se_tm: Vec<f64>,
    /// Fraction of runs with `M ≤ X^max` throughout.
    pub dominated_fraction: f64,
}

impl EmpiricalProfiles {
    pub fn sup_distance_tx(&self, eps: f64) -> f64 {
        sup_distance(&GridProfile { time: self.time, values: self.mean_tx.clone() }, eps)
    }
}

/// Requires `λ ≥ 4 log N / N`.
pub fn empirical_transformed_profile(
    p: &ModelParams,
    mu: &MuSchedule,
    t: f64,
    trajectories: usize,
    seed: u64,
) -> Result<EmpiricalProfiles, HydroError> {
    let n = p.n();
    let nf = n as f64;
    if p.lambda() < 4.0 * nf.ln() / nf {
        return Err(HydroError::Regime(format!("λ = {} < 4 log N / N", p.lambda())));
    }
    let tr = Transform::new(p)?;
    let real = t * nf / p.lambda();
    let runs = par_trajectories(trajectories, seed, |_, rng| {
        simulate_x_and_m(&Configuration::max(n), p, mu, real, &[], rng, |_, _, _, _| {})
    });
    let col = |f: &dyn Fn(usize, usize) -> f64| -> (Vec<f64>, Vec<f64>) {
        (0..=n)
            .map(|k| {
                let xs: Vec<f64> = (0..trajectories).map(|i| f(i, k)).collect();
                let (m, se) = crate::stats::mean_se(&xs);
                (m, if se.is_finite() { se } else { 0.0 })
            })
            .unzip()
    };
    let (mean_tx, se_tx) = col(&|i, k| tr.apply_unchecked(runs[i].x.heights[k]));
    let (mean_x, _) = col(&|i, k| runs[i].x.heights[k]);
    let (mean_tm, se_tm) = col(&|i, k| tr.apply_unchecked(runs[i].m[k].clamp(0.0, nf)));
    let t_mean_x = mean_x.iter().map(|&u| tr.apply_unchecked(u.clamp(0.0, nf))).collect();
    let dominated_fraction =
        runs.iter().filter(|r| r.dominated).count() as f64 / trajectories as f64;
    Ok(EmpiricalProfiles { time: t, mean_tx, se_tx, t_mean_x, mean_tm, se_tm, dominated_fraction })
}
