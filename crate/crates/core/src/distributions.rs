//! Beta and gamma machinery: interval beta densities, CDFs, samplers, the TV
//! distance between betas on shifted intervals, and tail diagnostics.

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::process::{ModelParams, SHAPE_CAP};
use crate::rng::Rng;
use crate::special::{inc_beta, inc_beta_below_mean, inc_gamma_lower, ln_beta, rlog1};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("shape parameters must be finite and at least 1 (got a = {a}, b = {b})")]
    InvalidShape { a: f64, b: f64 },
    #[error("interval must satisfy left < right with finite ends (got [{left}, {right}])")]
    InvalidInterval { left: f64, right: f64 },
    #[error("argument is not finite")]
    NonFinite,
    #[error("intervals do not overlap")]
    NoOverlap,
    #[error("intervals are identical")]
    DegenerateEqual,
    #[error("intervals are not ordered (lower must sit below upper at both ends)")]
    NotOrdered,
    #[error("the two intervals carry different shape parameters")]
    ShapeMismatch,
    #[error("rejection sampler exceeded its budget of {0} trials")]
    RejectionBudgetExceeded(u64),
}

/// Shapes `(a, b)` of a beta law; both at least 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self, DistError> {
        if !(a.is_finite() && b.is_finite() && a >= 1.0 && b >= 1.0) {
            return Err(DistError::InvalidShape { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a / s * (self.b / s) / (s + 1.0)
    }
}

/// Beta law rescaled to `[left, right]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalBeta {
    pub params: BetaParams,
    pub left: f64,
    pub right: f64,
}

impl IntervalBeta {
    pub fn new(params: BetaParams, left: f64, right: f64) -> Result<Self, DistError> {
        if !(left.is_finite() && right.is_finite() && left < right) {
            return Err(DistError::InvalidInterval { left, right });
        }
        Ok(Self { params, left, right })
    }

    pub fn len(&self) -> f64 {
        self.right - self.left
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_pdf(&self, u: f64) -> f64 {
        let (a, b) = (self.params.a, self.params.b);
        if u < self.left || u > self.right {
            return f64::NEG_INFINITY;
        }
        let mut v = -(a + b - 1.0) * self.len().ln() - ln_beta(a, b);
        if a != 1.0 {
            v += (a - 1.0) * (u - self.left).ln();
        }
        if b != 1.0 {
            v += (b - 1.0) * (self.right - u).ln();
        }
        v
    }

    pub fn pdf(&self, u: f64) -> f64 {
        self.ln_pdf(u).exp()
    }

    pub fn cdf(&self, u: f64) -> f64 {
        if u <= self.left {
            0.0
        } else if u >= self.right {
            1.0
        } else {
            inc_beta(self.params.a, self.params.b, (u - self.left) / self.len()).0
        }
    }

    /// `1 - cdf(u)`, computed directly.
    pub fn ccdf(&self, u: f64) -> f64 {
        if u <= self.left {
            1.0
        } else if u >= self.right {
            0.0
        } else {
            inc_beta(self.params.a, self.params.b, (u - self.left) / self.len()).1
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.left + sample_beta(self.params, rng) * self.len()
    }
}

/// Density of `d` at `u`; zero outside the support.
pub fn beta_pdf(d: &IntervalBeta, u: f64) -> Result<f64, DistError> {
    if !u.is_finite() {
        return Err(DistError::NonFinite);
    }
    Ok(d.pdf(u))
}

/// CDF of `d` at `u`.
pub fn beta_cdf(d: &IntervalBeta, u: f64) -> Result<f64, DistError> {
    if !u.is_finite() {
        return Err(DistError::NonFinite);
    }
    Ok(d.cdf(u))
}

/// Marsaglia–Tsang gamma sampler for shape ≥ 1, with the acceptance test
/// rearranged so that it stays exact for shapes up to 1e300.
#[derive(Clone, Copy, Debug)]
pub struct GammaSampler {
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Self {
        debug_assert!(shape >= 1.0 && shape.is_finite());
        let d = shape - 1.0 / 3.0;
        Self { d, c: 1.0 / (9.0 * d).sqrt() }
    }

    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let u = self.c * z;
            if u <= -1.0 {
                continue;
            }
            let w = 1.0 + u;
            let v = w * w * w;
            let un: f64 = rng.random();
            let z2 = z * z;
            if un < 1.0 - 0.0331 * z2 * z2 {
                return self.d * v;
            }
            // d(1 - v + ln v) = d(-3 rlog1(u) - 3u² - u³)
            let tail = -3.0 * rlog1(u) - 3.0 * u * u - u * u * u;
            if un.ln() < 0.5 * z2 + self.d * tail {
                return self.d * v;
            }
        }
    }
}

/// Beta sampler built from two gamma samplers.
#[derive(Clone, Copy, Debug)]
pub struct BetaSampler {
    ga: GammaSampler,
    gb: GammaSampler,
}

impl BetaSampler {
    pub fn new(p: BetaParams) -> Self {
        Self { ga: GammaSampler::new(p.a), gb: GammaSampler::new(p.b) }
    }

    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let x = self.ga.sample(rng);
        let y = self.gb.sample(rng);
        x / (x + y)
    }
}

/// One Gamma(shape, 1) draw, shape ≥ 1.
pub fn sample_gamma(shape: f64, rng: &mut Rng) -> f64 {
    GammaSampler::new(shape).sample(rng)
}

/// Log of one Gamma(e^ln_shape, 1) draw. Shapes beyond the f64 range use the
/// normal limit, whose error is far below double resolution there.
pub fn sample_ln_gamma(ln_shape: f64, rng: &mut Rng) -> f64 {
    if ln_shape < 690.0 {
        sample_gamma(ln_shape.exp().max(1.0), rng).ln()
    } else {
        let z: f64 = rng.sample(StandardNormal);
        ln_shape + z * (-0.5 * ln_shape).exp()
    }
}

/// One Beta(a, b) draw in (0, 1).
pub fn sample_beta(p: BetaParams, rng: &mut Rng) -> f64 {
    BetaSampler::new(p).sample(rng)
}

/// `ln ρ_up(w) - ln ρ_low(w)` for two betas with common shapes on
/// `[l1, r1]` (low) and `[l2, r2]` (up), free of cancellation for huge shapes.
#[inline]
pub fn ln_density_ratio(p: BetaParams, l1: f64, r1: f64, l2: f64, r2: f64, w: f64) -> f64 {
    if w < l2 || w > r2 {
        return f64::NEG_INFINITY;
    }
    if w < l1 || w > r1 {
        return f64::INFINITY;
    }
    let (a, b) = (p.a, p.b);
    let mut d = 0.0;
    if a != 1.0 && l1 != l2 {
        d += (a - 1.0) * ((l1 - l2) / (w - l1)).ln_1p();
    }
    if b != 1.0 && r1 != r2 {
        d += (b - 1.0) * ((r2 - r1) / (r1 - w)).ln_1p();
    }
    let dlen = (r2 - r1) - (l2 - l1);
    if dlen != 0.0 {
        d -= (a + b - 1.0) * (dlen / (r1 - l1)).ln_1p();
    }
    d
}

fn check_pair(lower: &IntervalBeta, upper: &IntervalBeta) -> Result<(), DistError> {
    if lower.params != upper.params {
        return Err(DistError::ShapeMismatch);
    }
    if lower.left > upper.left || lower.right > upper.right {
        return Err(DistError::NotOrdered);
    }
    Ok(())
}

/// The unique point of the overlap where the two interval-beta densities cross.
///
/// The density ratio `ρ_up/ρ_low` is increasing on the overlap, so bisection on
/// its logarithm converges to the crossing. When the densities agree on a whole
/// sub-interval (uniform shapes, equal lengths) the overlap midpoint is returned.
pub fn density_crossing(lower: &IntervalBeta, upper: &IntervalBeta) -> Result<f64, DistError> {
    check_pair(lower, upper)?;
    if lower.left == upper.left && lower.right == upper.right {
        return Err(DistError::DegenerateEqual);
    }
    if lower.right <= upper.left {
        return Err(DistError::NoOverlap);
    }
    let (mut lo, mut hi) = (upper.left, lower.right);
    let p = lower.params;
    let ratio = |w: f64| ln_density_ratio(p, lower.left, lower.right, upper.left, upper.right, w);
    if p.a == 1.0 && p.b == 1.0 {
        let (l1, l2) = (lower.len(), upper.len());
        return Ok(if l1 == l2 {
            0.5 * (lo + hi)
        } else if l1 > l2 {
            lo
        } else {
            hi
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Total-variation distance between two interval betas with common shapes.
pub fn tv_interval_betas(lower: &IntervalBeta, upper: &IntervalBeta) -> Result<f64, DistError> {
    match density_crossing(lower, upper) {
        Ok(s) => Ok((lower.cdf(s) - upper.cdf(s)).clamp(0.0, 1.0)),
        Err(DistError::DegenerateEqual) => Ok(0.0),
        Err(DistError::NoOverlap) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Probability that the maximal coupling of the two laws merges them.
pub fn merge_probability(lower: &IntervalBeta, upper: &IntervalBeta) -> Result<f64, DistError> {
    tv_interval_betas(lower, upper).map(|tv| 1.0 - tv)
}

/// Comparison of a beta lower tail against a gamma lower tail on a probe grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratio_max: f64,
}

/// `max_t P(U ≤ t) / P(Z ≤ t)` with `U ~ Beta(u, v)` and `Z ~ Gamma(u, rate u + v)`.
pub fn check_tail_domination(u_shape: f64, v_shape: f64, probes: &[f64]) -> TailReport {
    let mut lhs = Vec::with_capacity(probes.len());
    let mut rhs = Vec::with_capacity(probes.len());
    let mut ratio_max: f64 = 0.0;
    for &t in probes {
        let l = inc_beta(u_shape, v_shape, t.clamp(0.0, 1.0)).0;
        let r = inc_gamma_lower(u_shape, (u_shape + v_shape) * t.max(0.0));
        let ratio = if l == 0.0 { 0.0 } else { l / r };
        ratio_max = ratio_max.max(ratio);
        lhs.push(l);
        rhs.push(r);
    }
    TailReport { grid: probes.to_vec(), lhs, rhs, ratio_max }
}

/// Exact `P(U_k ≤ (1-λ)/2 - C log N · r^{-k/2})` with `U_k ~ Beta(α_k, α_{k+1})`.
///
/// Shapes beyond the sampler cap are reduced with the deviation rescaled by
/// the square root of the reduction, which leaves the standardized deviation
/// (and so the tail to leading order) unchanged.
pub fn check_left_tail(k: usize, p: &ModelParams, c: f64) -> f64 {
    let n = p.n() as f64;
    let delta = c * n.ln() * (-0.5 * k as f64 * p.ln_r()).exp();
    if delta >= 0.5 * (1.0 - p.lambda()) {
        return 0.0;
    }
    let r = p.r();
    let ln_cap = (SHAPE_CAP / (1.0 + r)).ln();
    let ln_a = p.ln_alpha(k);
    let (a, scale) = if ln_a > ln_cap {
        (ln_cap.exp(), (0.5 * (ln_a - ln_cap)).exp())
    } else {
        (ln_a.exp(), 1.0)
    };
    inc_beta_below_mean(a, a * r, delta * scale)
}
