//! Modified Bessel functions of integer order on the positive real axis.
//!
//! Imaginary-frequency Green's functions only ever need `K_n` and `I_n` with
//! real positive arguments. Everything here is computed in scaled or
//! logarithmic form first so that `e^{-700}`-sized kernels stay representable.

use crate::error::{CasimirError, Result};
use std::f64::consts::{LN_2, PI};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

// Below this the power series for K0/K1 is used; above it Steed's CF2.
const K_SERIES_MAX: f64 = 2.0;
// I0/I1: power series below, Hankel asymptotic expansion above.
const I_SERIES_MAX: f64 = 20.0;
const MAX_ITER: usize = 10_000;
// Rescale recurrences by 2^±RESCALE_BITS when they leave this window.
const RESCALE_BITS: i32 = 512;
const RESCALE_HI: f64 = 1.0e150;

/// A positive number stored as `value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBesselValue {
    pub value: f64,
    pub log_scale: f64,
}

impl ScaledBesselValue {
    pub fn to_f64(self) -> f64 {
        self.value * self.log_scale.exp()
    }

    pub fn ln(self) -> f64 {
        self.value.ln() + self.log_scale
    }
}

fn check_arg(func: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(CasimirError::domain(func, format!("argument must be finite and positive, got {x}")));
    }
    Ok(())
}

/// `m * 2^e` without intermediate overflow.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        m *= 2f64.powi(-1000);
        e += 1000;
    }
    m * 2f64.powi(e as i32)
}

/// Power series for (I0, I1, K0, K1), unscaled. Valid for 0 < x <= 2.
fn small_series(x: f64) -> (f64, f64, f64, f64) {
    let t = 0.25 * x * x;
    let half = 0.5 * x;
    let ln_half = half.ln();

    // term0_k = t^k/(k!)^2, term1_k = t^k/(k!(k+1)!)
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0; // H_k
    let mut i0 = 1.0;
    let mut i1 = 1.0;
    let mut s0 = 0.0; // sum_{k>=1} term0_k H_k
    let mut s1 = -2.0 * EULER_GAMMA + 1.0; // sum_k term1_k (psi(k+1)+psi(k+2)), k=0 term
    for k in 1..60 {
        let kf = k as f64;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        i0 += term0;
        i1 += term1;
        s0 += term0 * harmonic;
        let psi_sum = -2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0);
        s1 += term1 * psi_sum;
        if term0 < 1e-18 * i0 && term1 < 1e-18 * i1 {
            break;
        }
    }
    let i1 = half * i1;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.5 * half * s1;
    (i0, i1, k0, k1)
}

/// Steed's continued fraction (CF2) for e^x K0(x), e^x K1(x); x >= 2.
fn k01_cf2_scaled(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// (e^x K0(x), e^x K1(x)) for x > 0, no argument check.
#[inline]
pub(crate) fn k0_k1_scaled(x: f64) -> (f64, f64) {
    if x <= K_SERIES_MAX {
        let (_, _, k0, k1) = small_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_cf2_scaled(x)
    }
}

/// (K0(x), K1(x)) for x > 0, no argument check. Underflows to 0 past ~700.
#[inline]
pub(crate) fn k0_k1(x: f64) -> (f64, f64) {
    if x <= K_SERIES_MAX {
        let (_, _, k0, k1) = small_series(x);
        (k0, k1)
    } else {
        let (k0, k1) = k01_cf2_scaled(x);
        let e = (-x).exp();
        (k0 * e, k1 * e)
    }
}

fn i01_asymptotic_scaled(x: f64) -> (f64, f64) {
    // e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k
    let series = |nu: f64| {
        let mu = 4.0 * nu * nu;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..MAX_ITER {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            term *= -(mu - odd * odd) / (8.0 * kf * x);
            if term.abs() >= prev {
                break;
            }
            prev = term.abs();
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    };
    let pre = 1.0 / (2.0 * PI * x).sqrt();
    (pre * series(0.0), pre * series(1.0))
}

/// (e^{-x} I0(x), e^{-x} I1(x)) for x >= 0, no argument check.
#[inline]
pub(crate) fn i0_i1_scaled(x: f64) -> (f64, f64) {
    if x <= I_SERIES_MAX {
        let (i0, i1) = i01_series(x);
        let e = (-x).exp();
        (i0 * e, i1 * e)
    } else {
        i01_asymptotic_scaled(x)
    }
}

/// (I0(x), I1(x)) by power series; accurate wherever the series is used.
#[inline]
pub(crate) fn i01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut i0 = 1.0;
    let mut i1 = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        i0 += term0;
        i1 += term1;
        if term0 < 1e-17 * i0 {
            break;
        }
    }
    (i0, 0.5 * x * i1)
}

/// Scaled K_k(x) for k = 0..=nmax as (mantissa, base-2 exponent) with
/// e^x K_k(x) = mantissa * 2^exponent. Upward recurrence is stable for K.
fn k_scaled_sequence(nmax: usize, x: f64) -> Vec<(f64, i64)> {
    let (k0, k1) = k0_k1_scaled(x);
    let mut out = Vec::with_capacity(nmax + 1);
    out.push((k0, 0));
    if nmax == 0 {
        return out;
    }
    out.push((k1, 0));
    let mut prev = k0;
    let mut cur = k1;
    let mut exp2: i64 = 0;
    for k in 1..nmax {
        let next = prev + (2.0 * k as f64 / x) * cur;
        prev = cur;
        cur = next;
        if cur > RESCALE_HI {
            let f = 2f64.powi(-RESCALE_BITS);
            prev *= f;
            cur *= f;
            exp2 += RESCALE_BITS as i64;
        }
        out.push((cur, exp2));
    }
    out
}

/// I_{n+1}(x)/I_n(x) by the continued fraction 1/(b1 + 1/(b2 + ...)),
/// b_k = 2(n+k)/x, evaluated with the modified Lentz method.
fn i_ratio_cf1(n: usize, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..(MAX_ITER * 10) {
        let b = 2.0 * (n + k) as f64 / x;
        d += b;
        if d == 0.0 {
            d = tiny;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Scaled I_k(x) for k = 0..=nmax as (mantissa, base-2 exponent) with
/// e^{-x} I_k(x) = mantissa * 2^exponent. Miller-type downward recurrence
/// seeded with the CF1 ratio and normalized against I0.
fn i_scaled_sequence(nmax: usize, x: f64) -> Vec<(f64, i64)> {
    let (i0s, i1s) = i0_i1_scaled(x);
    if nmax == 0 {
        return vec![(i0s, 0)];
    }
    if nmax == 1 {
        return vec![(i0s, 0), (i1s, 0)];
    }
    // y_k proportional to I_k; stored as (mantissa, rescale count).
    let mut mant = vec![0.0; nmax + 1];
    let mut shift = vec![0i64; nmax + 1];
    let mut upper = i_ratio_cf1(nmax, x); // y_{nmax+1}
    let mut cur = 1.0; // y_{nmax}
    let mut s: i64 = 0;
    mant[nmax] = cur;
    for k in (1..=nmax).rev() {
        let lower = upper + (2.0 * k as f64 / x) * cur;
        upper = cur;
        cur = lower;
        if cur > RESCALE_HI {
            let f = 2f64.powi(-RESCALE_BITS);
            upper *= f;
            cur *= f;
            s += 1;
        }
        mant[k - 1] = cur;
        shift[k - 1] = s;
    }
    let bits = RESCALE_BITS as i64;
    (0..=nmax)
        .map(|k| {
            if k == 0 {
                (i0s, 0)
            } else {
                (i0s * (mant[k] / mant[0]), (shift[k] - shift[0]) * bits)
            }
        })
        .collect()
}

/// K_n(x). Underflows to zero where the true value is below f64 range.
pub fn bessel_k(n: u32, x: f64) -> Result<f64> {
    check_arg("bessel_k", x)?;
    let (m, e) = *k_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ldexp(m * (-x).exp(), e))
}

/// e^x K_n(x); use this past x = 700 where K_n itself underflows.
pub fn bessel_k_scaled(n: u32, x: f64) -> Result<f64> {
    check_arg("bessel_k_scaled", x)?;
    let (m, e) = *k_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ldexp(m, e))
}

pub fn bessel_k_log(n: u32, x: f64) -> Result<ScaledBesselValue> {
    check_arg("bessel_k_log", x)?;
    let (m, e) = *k_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ScaledBesselValue {
        value: m,
        log_scale: e as f64 * LN_2 - x,
    })
}

/// ln K_k(x) for k = 0..=nmax.
pub fn bessel_k_log_seq(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_arg("bessel_k_log_seq", x)?;
    Ok(k_scaled_sequence(nmax, x)
        .into_iter()
        .map(|(m, e)| m.ln() + e as f64 * LN_2 - x)
        .collect())
}

/// I_n(x). Overflows to infinity past roughly x = 713.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    check_arg("bessel_i", x)?;
    if n <= 1 && x <= I_SERIES_MAX {
        let (i0, i1) = i01_series(x);
        return Ok(if n == 0 { i0 } else { i1 });
    }
    let (m, e) = *i_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ldexp(m * x.exp(), e))
}

/// e^{-x} I_n(x).
pub fn bessel_i_scaled(n: u32, x: f64) -> Result<f64> {
    check_arg("bessel_i_scaled", x)?;
    let (m, e) = *i_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ldexp(m, e))
}

pub fn bessel_i_log(n: u32, x: f64) -> Result<ScaledBesselValue> {
    check_arg("bessel_i_log", x)?;
    let (m, e) = *i_scaled_sequence(n as usize, x).last().unwrap();
    Ok(ScaledBesselValue {
        value: m,
        log_scale: e as f64 * LN_2 + x,
    })
}

/// ln I_k(x) for k = 0..=nmax.
pub fn bessel_i_log_seq(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_arg("bessel_i_log_seq", x)?;
    Ok(i_scaled_sequence(nmax, x)
        .into_iter()
        .map(|(m, e)| m.ln() + e as f64 * LN_2 + x)
        .collect())
}

/// (K_n, K_n', K_n'').
pub fn bessel_k_derivatives(n: u32, x: f64) -> Result<(f64, f64, f64)> {
    check_arg("bessel_k_derivatives", x)?;
    let nu = n as f64;
    let seq = k_scaled_sequence(n as usize + 1, x);
    let val = |k: usize| ldexp(seq[k].0 * (-x).exp(), seq[k].1);
    let k = val(n as usize);
    // K_n' = -K_{n+1} + (n/x) K_n holds for every n, including n = 0.
    let kp = -val(n as usize + 1) + nu / x * k;
    let kpp = (1.0 + nu * nu / (x * x)) * k - kp / x;
    Ok((k, kp, kpp))
}
