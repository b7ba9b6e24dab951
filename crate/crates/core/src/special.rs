//! Log-gamma, log-beta, and the regularized incomplete beta and gamma functions.
//!
//! Shapes in this crate routinely reach 1e28 and beyond, where the textbook
//! `exp(a ln x + b ln(1-x) - ln B(a,b))` prefactor cancels catastrophically.
//! Large-shape paths therefore go through `rlog1` and Stirling remainders.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const STIRLING_MIN: f64 = 10.0;

/// Stirling remainder `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]`, for `x ≥ 10`.
fn stirling_delta(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let t = 1.0 / (x * x);
    let mut s = C[7];
    for c in C[..7].iter().rev() {
        s = s * t + c;
    }
    s / x
}

/// `δ(a) + δ(b) - δ(a+b)` for `a, b ≥ 10`.
fn stirling_delta_sum(a: f64, b: f64) -> f64 {
    stirling_delta(a) + stirling_delta(b) - stirling_delta(a + b)
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= STIRLING_MIN {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_delta(x);
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < STIRLING_MIN {
        prod *= z;
        z += 1.0;
    }
    ln_gamma(z) - prod.ln()
}

/// `ln Γ(b) - ln Γ(a + b)` for `b ≥ 10`, any `a > 0`.
fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    -a * b.ln() - (a + b - 0.5) * (a / b).ln_1p() + a + stirling_delta(b) - stirling_delta(a + b)
}

/// Natural log of the beta function, accurate when one or both shapes are huge.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi < STIRLING_MIN {
        ln_gamma(lo) + ln_gamma(hi) - ln_gamma(lo + hi)
    } else if lo < STIRLING_MIN {
        ln_gamma(lo) + ln_gamma_ratio(lo, hi)
    } else {
        let s = lo + hi;
        LN_SQRT_2PI - 0.5 * hi.ln()
            + stirling_delta_sum(lo, hi)
            + (lo - 0.5) * (lo / s).ln()
            + hi * (-lo / s).ln_1p()
    }
}

/// `x - ln(1 + x)` for `x > -1`, without cancellation near zero.
pub fn rlog1(x: f64) -> f64 {
    if x.abs() > 0.5 {
        return x - x.ln_1p();
    }
    // ln(1+x) = 2 atanh(t), t = x/(2+x); x - 2t = t x.
    let t = x / (2.0 + x);
    let t2 = t * t;
    let mut term = t2;
    let mut series = 0.0;
    let mut k = 3.0;
    loop {
        let add = term / k;
        series += add;
        if add.abs() <= 1e-17 * series.abs() {
            break;
        }
        term *= t2;
        k += 2.0;
    }
    t * x - 2.0 * t * series
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x ≥ 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 2.0 {
        // erf(x) = (2/√π) e^{-x²} Σ 2^n x^{2n+1} / (2n+1)!!, all terms positive.
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        x2.exp() - 2.0 * FRAC_1_SQRT_PI * sum
    } else {
        // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for n in 1..500 {
            let an = 0.5 * n as f64;
            d = x + an * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        FRAC_1_SQRT_PI / f
    }
}

/// `ln[x^a y^b / B(a, b)]` with `y = 1 - x` supplied separately for precision.
fn ln_beta_prefactor(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if a.min(b) >= STIRLING_MIN {
        let lambda = if a > b { scaled_minus(a, b, y, b) } else { -scaled_minus(a, b, x, a) };
        let e = -(a * rlog1(-lambda / a) + b * rlog1(lambda / b));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        e + 0.5 * (lo.ln() - (lo / hi).ln_1p()) - LN_SQRT_2PI - stirling_delta_sum(a, b)
    } else {
        a * x.ln() + b * y.ln() - ln_beta(a, b)
    }
}

/// Continued fraction for `I_x(a,b)` (modified Lentz), valid for `x < (a+1)/(a+b+2)`.
fn beta_cf_lentz(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Didonato–Morris continued fraction for `I_x(a,b)`, for `λ = a - (a+b)x ≥ 0`.
fn beta_cf_dm(a: f64, b: f64, x: f64, y: f64, lambda: f64) -> f64 {
    let ln_pre = ln_beta_prefactor(a, b, x, y);
    if ln_pre < -745.0 {
        return 0.0;
    }
    let c = lambda + 1.0;
    let c0 = b / a;
    let c1 = 1.0 + 1.0 / a;
    let yp1 = y + 1.0;
    let mut n = 0.0;
    let mut p = 1.0;
    let mut s = a + 1.0;
    let mut an = 0.0;
    let mut bn = 1.0;
    let mut anp1 = 1.0;
    let mut bnp1 = c / c1;
    let mut r = c1 / c;
    for _ in 0..10_000 {
        n += 1.0;
        let t = n / a;
        let w = n * (b - n) * x;
        let e = a / s;
        let alpha = p * (p + c0) * e * e * (w * x);
        let e = (1.0 + t) / (c1 + t + t);
        let beta = n + w / s + e * (c + n * yp1);
        p = 1.0 + t;
        s += 2.0;

        let t = alpha * an + beta * anp1;
        an = anp1;
        anp1 = t;
        let t = alpha * bn + beta * bnp1;
        bn = bnp1;
        bnp1 = t;

        let r0 = r;
        r = anp1 / bnp1;
        if (r - r0).abs() <= 1e-15 * r {
            break;
        }
        an /= bnp1;
        bn /= bnp1;
        anp1 = r;
        bnp1 = 1.0;
    }
    (ln_pre + r.ln()).exp()
}

/// Temme's uniform asymptotic expansion of `I_x(a,b)` for large shapes near the
/// mean, with `λ = a - (a+b)x ≥ 0`.
fn beta_asymptotic(a: f64, b: f64, lambda: f64) -> f64 {
    const NUM_IT: usize = 20;
    const E0: f64 = 2.0 * FRAC_1_SQRT_PI;
    const E1: f64 = std::f64::consts::FRAC_1_SQRT_2 / 2.0;

    let f = a * rlog1(-lambda / a) + b * rlog1(lambda / b);
    let t = (-f).exp();
    if t == 0.0 {
        return 0.0;
    }
    let z0 = f.sqrt();
    let z = 0.5 * z0 / E1;
    let z2 = f + f;

    let (h, r1, w0) = if a < b {
        let h = a / b;
        (h, (b - a) / b, 1.0 / (a * (1.0 + h)).sqrt())
    } else {
        let h = b / a;
        (h, (b - a) / a, 1.0 / (b * (1.0 + h)).sqrt())
    };
    let r0 = 1.0 / (1.0 + h);

    let mut a0 = [0.0; NUM_IT + 1];
    let mut b0 = [0.0; NUM_IT + 1];
    let mut c = [0.0; NUM_IT + 1];
    let mut d = [0.0; NUM_IT + 1];
    a0[0] = 2.0 / 3.0 * r1;
    c[0] = -0.5 * a0[0];
    d[0] = -c[0];
    let mut j0 = 0.5 / E0 * erfcx(z0);
    let mut j1 = E1;
    let mut sum = j0 + d[0] * w0 * j1;

    let mut s = 1.0;
    let h2 = h * h;
    let mut hn = 1.0;
    let mut w = w0;
    let mut znm1 = z;
    let mut zn = z2;
    for n in (2..=NUM_IT).step_by(2) {
        hn *= h2;
        a0[n - 1] = 2.0 * r0 * (1.0 + h * hn) / (n as f64 + 2.0);
        s += hn;
        a0[n] = 2.0 * r1 * s / (n as f64 + 3.0);

        for i in n..=n + 1 {
            let r = -0.5 * (i as f64 + 1.0);
            b0[0] = r * a0[0];
            for m in 2..=i {
                let mut bsum = 0.0;
                for j in 1..m {
                    bsum += (j as f64 * r - (m - j) as f64) * a0[j - 1] * b0[m - j - 1];
                }
                b0[m - 1] = r * a0[m - 1] + bsum / m as f64;
            }
            c[i - 1] = b0[i - 1] / (i as f64 + 1.0);
            let mut dsum = 0.0;
            for j in 1..i {
                dsum += d[i - j - 1] * c[j - 1];
            }
            d[i - 1] = -(dsum + c[i - 1]);
        }

        j0 = E1 * znm1 + (n as f64 - 1.0) * j0;
        j1 = E1 * zn + n as f64 * j1;
        znm1 *= z2;
        zn *= z2;
        w *= w0;
        let t0 = d[n - 1] * w * j0;
        w *= w0;
        let t1 = d[n] * w * j1;
        sum += t0 + t1;
        if t0.abs() + t1.abs() <= 1e-15 * sum {
            break;
        }
    }
    E0 * t * (-stirling_delta_sum(a, b)).exp() * sum
}

/// `(a + b)·t - c` with the sum and product carried in double-double, so that
/// the deviation from the mean survives shapes far beyond 1/ε.
fn scaled_minus(a: f64, b: f64, t: f64, c: f64) -> f64 {
    let s = a + b;
    let bb = s - a;
    let s_err = (a - (s - bb)) + (b - bb);
    let p = s * t;
    let p_err = s.mul_add(t, -p);
    (p - c) + p_err + s_err * t
}

/// Regularized incomplete beta `(I_x(a,b), 1 - I_x(a,b))`, each to near full
/// relative precision, for `a, b > 0` and `x ∈ [0, 1]`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let y = 1.0 - x;
    let lambda = if a > b { scaled_minus(a, b, y, b) } else { -scaled_minus(a, b, x, a) };
    // Orient so that x sits at or below the mean.
    let (a0, b0, x0, y0, lam, swapped) = if lambda < 0.0 {
        (b, a, y, x, -lambda, true)
    } else {
        (a, b, x, y, lambda, false)
    };
    let w = if b0 < 40.0 {
        if x0 < (a0 + 1.0) / (a0 + b0 + 2.0) {
            let ln_pre = ln_beta_prefactor(a0, b0, x0, y0);
            (ln_pre.exp() * beta_cf_lentz(a0, b0, x0) / a0).min(1.0)
        } else {
            let ln_pre = ln_beta_prefactor(b0, a0, y0, x0);
            1.0 - (ln_pre.exp() * beta_cf_lentz(b0, a0, y0) / b0).min(1.0)
        }
    } else {
        let use_asym = if a0 > b0 {
            b0 > 100.0 && lam <= 0.03 * b0
        } else {
            a0 > 100.0 && lam <= 0.03 * a0
        };
        if use_asym {
            beta_asymptotic(a0, b0, lam)
        } else {
            beta_cf_dm(a0, b0, x0, y0, lam)
        }
    };
    let w = w.clamp(0.0, 1.0);
    if swapped { (1.0 - w, w) } else { (w, 1.0 - w) }
}

/// `I_x(a, b)` at `x = a/(a+b) - delta`, with the deviation taken from the
/// exact mean rather than from a rounded `x`. For shapes beyond 1/ε the
/// standard deviation is below the spacing of doubles near the mean, and only
/// this form resolves the tail.
pub fn inc_beta_below_mean(a: f64, b: f64, delta: f64) -> f64 {
    let s = a + b;
    let m = a / s;
    if delta <= 0.0 {
        return inc_beta(a, b, m - delta).0;
    }
    if delta >= m {
        return 0.0;
    }
    let lam = s * delta;
    let lo = a.min(b);
    if lo > 100.0 && lam <= 0.03 * lo {
        beta_asymptotic(a, b, lam).clamp(0.0, 1.0)
    } else {
        inc_beta(a, b, m - delta).0
    }
}

/// `ln(e^{-t} t^n / n!)`, accurate near the mode for very large `t`.
pub fn ln_poisson_pmf(n: u64, t: f64) -> f64 {
    if n == 0 {
        return -t;
    }
    let nf = n as f64;
    if n < 10 || t <= 0.0 {
        return nf * t.ln() - t - ln_gamma(nf + 1.0);
    }
    // n ln(n/t) + t - n, with the cancellation near n = t removed.
    let bd0 = nf * ((nf - t) / t).ln_1p() - (nf - t);
    -bd0 - 0.5 * nf.ln() - LN_SQRT_2PI - stirling_delta(nf)
}

/// Inverse of `x ↦ I_x(a,b)`: the `p`-quantile of Beta(a, b).
///
/// `upper = true` interprets `p` as an upper-tail probability, which keeps
/// precision for quantiles close to 1.
pub fn inc_beta_inv(a: f64, b: f64, p: f64, upper: bool) -> f64 {
    let target = p.clamp(0.0, 1.0);
    let tail = |x: f64| {
        let (w, w1) = inc_beta(a, b, x);
        if upper { w1 } else { w }
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..2000 {
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else if lo == 0.0 && hi > 1e-300 {
            hi * 1e-3
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let v = tail(mid);
        let below = if upper { v > target } else { v < target };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn inc_gamma_lower(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    // ln[x^a e^{-x} / Γ(a)]
    let ln_pre = if a >= STIRLING_MIN {
        -a * rlog1((x - a) / a) + 0.5 * a.ln() - LN_SQRT_2PI - stirling_delta(a)
    } else {
        a * x.ln() - x - ln_gamma(a)
    };
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..100_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum * ln_pre.exp()).min(1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - ln_pre.exp() * h).max(0.0)
    }
}

/// `ln(e^x + e^y)` without overflow.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + (-(x - y).abs()).exp().ln_1p()
}

/// Kolmogorov survival function `P(K > z)` for the limiting KS distribution.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        // Jacobi theta form, accurate for small z.
        let y = -PI * PI / (8.0 * z * z);
        let w = (2.0 * PI).sqrt() / z;
        let mut s = 0.0;
        for k in (1..=7).step_by(2) {
            s += (y * (k * k) as f64).exp();
        }
        1.0 - w * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * z * z).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}
