//! Integer-order Bessel functions, the Hankel functions H₀⁽¹⁾ and H₁⁽¹⁾, and
//! truncated Jacobi–Anger sums.
//!
//! J_n is computed with the ascending series for small arguments and with
//! Miller's normalized backward recurrence otherwise. The recurrence gives the
//! whole ladder J_0..J_m at once, which the Neumann series for Y₀ and Y₁ reuse.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};
use crate::C64;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_CUTOFF: f64 = 1.0;
const RESCALE: f64 = 1e250;

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::domain(format!("non-finite Bessel argument {x}")));
    }
    Ok(())
}

/// Ascending series for J_n(x), |x| small.
fn series_j(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let h2 = h * h;
    let mut sum = term;
    for k in 1..60 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn start_order(n: usize, x: f64) -> usize {
    let top = (n as f64).max(x);
    let m = (top + 20.0 + 2.0 * (40.0 * top).sqrt()) as usize;
    m + (m & 1)
}

/// J_0(x), …, J_nmax(x) for x ≥ 0 (odd orders negate for x < 0).
pub fn bessel_j_ladder(nmax: usize, x: f64) -> Result<Vec<f64>> {
    check_arg(x)?;
    let ax = x.abs();
    let mut out = vec![0.0; nmax + 1];
    if ax == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    if ax < SERIES_CUTOFF {
        for (n, v) in out.iter_mut().enumerate() {
            *v = series_j(n, ax);
        }
    } else {
        let m = start_order(nmax, ax);
        let two_over_x = 2.0 / ax;
        let mut next = 0.0;
        let mut cur = 1e-30;
        let mut norm = 0.0;
        for k in (1..=m).rev() {
            // cur = j_k, next = j_{k+1}
            if k <= nmax {
                out[k] = cur;
            }
            if k % 2 == 0 {
                norm += 2.0 * cur;
            }
            let prev = k as f64 * two_over_x * cur - next;
            next = cur;
            cur = prev;
            if cur.abs() > RESCALE {
                cur /= RESCALE;
                next /= RESCALE;
                norm /= RESCALE;
                for v in out.iter_mut() {
                    *v /= RESCALE;
                }
            }
        }
        out[0] = cur;
        norm += cur;
        for v in out.iter_mut() {
            *v /= norm;
        }
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    Ok(out)
}

/// Bessel function of the first kind J_n(x).
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::domain(format!("negative Bessel order {n}")));
    }
    check_arg(x)?;
    if x.abs() < SERIES_CUTOFF {
        let v = series_j(n as usize, x.abs());
        return Ok(if x < 0.0 && n % 2 == 1 { -v } else { v });
    }
    Ok(bessel_j_ladder(n as usize, x)?[n as usize])
}

const ASYMPTOTIC_CUTOFF: f64 = 25.0;

/// (J₀, J₁, Y₀, Y₁) at x > 0.
pub fn bessel_jy01(x: f64) -> Result<(f64, f64, f64, f64)> {
    check_arg(x)?;
    if x <= 0.0 {
        return Err(Error::domain(format!("Y_n needs x > 0, got {x}")));
    }
    if x >= ASYMPTOTIC_CUTOFF {
        let h0 = hankel_asymptotic(0, x);
        let h1 = hankel_asymptotic(1, x);
        return Ok((h0.re, h1.re, h0.im, h1.im));
    }
    jy01_neumann(x)
}

// Hankel's expansion; the terms keep shrinking well past 1e−17 for x ≥ 25.
fn hankel_asymptotic(n: i32, x: f64) -> C64 {
    let mu = 4.0 * (n * n) as f64;
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for k in 1..60 {
        let kk = k as f64;
        term *= C64::i() * (mu - (2.0 * kk - 1.0).powi(2)) / (8.0 * kk * x);
        sum += term;
        if term.norm() < 1e-17 {
            break;
        }
    }
    let phase = x - 0.5 * n as f64 * PI - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * C64::from_polar(1.0, phase) * sum
}

// Neumann series on top of one Miller ladder.
fn jy01_neumann(x: f64) -> Result<(f64, f64, f64, f64)> {
    let m = start_order(2, x);
    let j = bessel_j_ladder(m, x)?;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 <= m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * (lg * j[0] - 2.0 * s0);
    let y1 = -FRAC_2_PI * j[0] / x + FRAC_2_PI * (lg * j[1] + s1);
    Ok((j[0], j[1], y0, y1))
}

/// Hankel function of the first kind H_n⁽¹⁾(x) for n ∈ {0, 1}, x > 0.
pub fn hankel1(n: i32, x: f64) -> Result<C64> {
    if !(n == 0 || n == 1) {
        return Err(Error::domain(format!("hankel1 supports orders 0 and 1, got {n}")));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!(
            "hankel1 evaluated at x = {x}; split the log singularity instead"
        )));
    }
    let (j0, j1, y0, y1) = bessel_jy01(x)?;
    Ok(if n == 0 { C64::new(j0, y0) } else { C64::new(j1, y1) })
}

/// (J₀(x), J₁(x)) for x ≥ 0, without the Y evaluation.
pub fn bessel_j01(x: f64) -> Result<(f64, f64)> {
    check_arg(x)?;
    if x >= ASYMPTOTIC_CUTOFF {
        return Ok((hankel_asymptotic(0, x).re, hankel_asymptotic(1, x).re));
    }
    let j = bessel_j_ladder(1, x)?;
    Ok((j[0], j[1]))
}

/// Default truncation ⌈z⌉ + 20 for Jacobi–Anger sums.
pub fn default_truncation(z: f64) -> usize {
    z.abs().ceil() as usize + 20
}

/// J₀(z) + 2·Σ_{n=1..L} iⁿ J_n(z) cos(nφ).
pub fn jacobi_anger_partial(z: f64, phi: f64, l: usize) -> Result<C64> {
    let j = bessel_j_ladder(l, z)?;
    let mut acc = C64::new(j[0], 0.0);
    let mut ipow = C64::new(1.0, 0.0);
    for (n, jn) in j.iter().enumerate().skip(1) {
        ipow *= C64::i();
        acc += 2.0 * ipow * jn * (n as f64 * phi).cos();
    }
    Ok(acc)
}

/// Large-argument leading form √(2/(πx))·cos(x − nπ/2 − π/4).
pub fn bessel_j_asymptotic(n: i32, x: f64) -> f64 {
    (2.0 / (PI * x)).sqrt() * (x - 0.5 * n as f64 * PI - 0.25 * PI).cos()
}
