//! Integer-order cylinder functions of complex argument.
//!
//! `J_m` comes from Miller's backward recurrence normalized with the
//! generating-function identity `e^{±iz} = J_0 + 2 Σ (±i)^k J_k`, which does
//! not cancel in the lower half plane. `J_0, J_1, Y_0, Y_1` use power series
//! for `|z| ≤ SERIES_RADIUS` and the Hankel asymptotic expansion beyond;
//! higher-order Hankel functions follow from forward recurrence.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Switch between power series and asymptotic expansion for orders 0 and 1.
pub const SERIES_RADIUS: f64 = 12.0;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument {re}{im:+}i outside the supported domain")]
    Domain { re: f64, im: f64 },
    #[error("order {0} outside the supported range")]
    Order(u32),
    #[error("Hankel function is singular at z = 0")]
    Singular,
    #[error("non-finite result for order {order} at {re}{im:+}i")]
    Overflow { order: u32, re: f64, im: f64 },
    #[error("no sign change found while bracketing zero {l} of J_{m}")]
    Bracket { m: u32, l: u32 },
}

fn domain(z: C64) -> SpecFunError {
    SpecFunError::Domain { re: z.re, im: z.im }
}

const MAX_ORDER: u32 = 200;
const MAX_ABS: f64 = 1e4;

/// `J_0(z), J_1(z), Y_0(z), Y_1(z)` — the kernel workhorse.
#[derive(Clone, Copy, Debug)]
pub struct Cyl01 {
    pub j0: C64,
    pub j1: C64,
    pub y0: C64,
    pub y1: C64,
}

impl Cyl01 {
    #[inline]
    pub fn h0(&self) -> C64 {
        self.j0 + I * self.y0
    }

    #[inline]
    pub fn h1(&self) -> C64 {
        self.j1 + I * self.y1
    }
}

/// Orders 0 and 1 of `J` and `Y` at nonzero `z` with `Re z > 0` or `|z|`
/// inside the series disc.
pub fn cyl01(z: C64) -> Cyl01 {
    if z.norm() <= SERIES_RADIUS {
        cyl01_series(z)
    } else {
        cyl01_asymptotic(z)
    }
}

fn cyl01_series(z: C64) -> Cyl01 {
    let half = z * 0.5;
    let w = -(half * half);
    let mut term0 = C64::new(1.0, 0.0); // (−w)^k/(k!)²  with sign folded in
    let mut term1 = C64::new(1.0, 0.0); // (−w)^k/(k!(k+1)!)
    let mut sj0 = term0;
    let mut sj1 = term1;
    // Y0 tail: Σ_{k≥1} H_k (−z²/4)^k/(k!)²  (enters with a minus sign)
    let mut sy0 = C64::new(0.0, 0.0);
    // Y1 tail: Σ_{k≥0} (ψ(k+1)+ψ(k+2)) (−z²/4)^k/(k!(k+1)!)
    let mut sy1 = C64::new(1.0 - 2.0 * EULER_GAMMA, 0.0);
    let mut harm = 0.0;
    let tol = 1e-18;
    let mut k = 1.0f64;
    loop {
        term0 = term0 * w / (k * k);
        term1 = term1 * w / (k * (k + 1.0));
        harm += 1.0 / k;
        let harm_next = harm + 1.0 / (k + 1.0);
        sj0 += term0;
        sj1 += term1;
        sy0 += term0 * harm;
        sy1 += term1 * (harm + harm_next - 2.0 * EULER_GAMMA);
        let small = (term0.norm() + term1.norm()) * (1.0 + harm);
        if small < tol || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    let j0 = sj0;
    let j1 = half * sj1;
    let log_half = half.ln();
    let y0 = FRAC_2_PI * ((log_half + EULER_GAMMA) * j0 - sy0);
    let y1 = FRAC_2_PI * log_half * j1 - FRAC_2_PI / z - half * sy1 / PI;
    Cyl01 { j0, j1, y0, y1 }
}

/// Hankel asymptotic sums `P ± iQ` for orders 0 and 1: returns
/// `(Σ i^k a_k(ν)/z^k, Σ (−i)^k a_k(ν)/z^k)`.
fn hankel_sums(nu: f64, z: C64) -> (C64, C64) {
    let mu = 4.0 * nu * nu;
    let inv = 1.0 / z;
    let mut ak = C64::new(1.0, 0.0);
    let mut plus = ak;
    let mut minus = ak;
    let mut ipow = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        ak = ak * (mu - odd * odd) / (kf * 8.0) * inv;
        ipow *= I;
        let mag = ak.norm();
        if mag > last {
            break;
        }
        plus += ipow * ak;
        minus += ipow.conj() * ak;
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }
    (plus, minus)
}

fn cyl01_asymptotic(z: C64) -> Cyl01 {
    let pref = (FRAC_2_PI / z).sqrt();
    let (p0, m0) = hankel_sums(0.0, z);
    let (p1, m1) = hankel_sums(1.0, z);
    let w0 = z - FRAC_PI_4;
    let w1 = z - FRAC_PI_2 - FRAC_PI_4;
    let e0p = (I * w0).exp();
    let e0m = (-I * w0).exp();
    let e1p = (I * w1).exp();
    let e1m = (-I * w1).exp();
    let h10 = pref * e0p * p0;
    let h20 = pref * e0m * m0;
    let h11 = pref * e1p * p1;
    let h21 = pref * e1m * m1;
    let j0 = (h10 + h20) * 0.5;
    let j1 = (h11 + h21) * 0.5;
    let y0 = (h10 - h20) * (-0.5 * I);
    let y1 = (h11 - h21) * (-0.5 * I);
    Cyl01 { j0, j1, y0, y1 }
}

fn check_arg(z: C64) -> Result<(), SpecFunError> {
    if !z.re.is_finite() || !z.im.is_finite() || z.norm() >= MAX_ABS {
        return Err(domain(z));
    }
    Ok(())
}

/// Power series for `J_m` (small `|z|`).
fn bessel_j_series(m: u32, z: C64) -> C64 {
    let half = z * 0.5;
    let w = -(half * half);
    let mut lead = C64::new(1.0, 0.0);
    for k in 1..=m {
        lead = lead * half / k as f64;
    }
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term = term * w / (kf * (kf + m as f64));
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    lead * sum
}

/// `J_0(z) … J_{mmax}(z)`.
pub fn bessel_j_seq(mmax: u32, z: C64) -> Result<Vec<C64>, SpecFunError> {
    if mmax > MAX_ORDER {
        return Err(SpecFunError::Order(mmax));
    }
    check_arg(z)?;
    let az = z.norm();
    if az <= 1.0 {
        return Ok((0..=mmax).map(|m| bessel_j_series(m, z)).collect());
    }
    // Miller backward recurrence from well above max(m, |z|).
    let top = (mmax as f64).max(az);
    let start = (top + 30.0 + 12.0 * top.cbrt()) as usize + 2;
    let mut f = vec![C64::new(0.0, 0.0); start + 2];
    f[start] = C64::new(1e-20, 0.0);
    let inv = 1.0 / z;
    for k in (1..=start).rev() {
        let next = f[k] * (2.0 * k as f64) * inv - f[k + 1];
        f[k - 1] = next;
        if next.norm() > 1e200 {
            let scale = 1e-200;
            for v in f[k - 1..].iter_mut() {
                *v *= scale;
            }
        }
    }
    // Normalization through e^{iz} (lower half plane) or e^{-iz}.
    let (rot, target) = if z.im <= 0.0 { (I, (I * z).exp()) } else { (-I, (-I * z).exp()) };
    let mut sum = f[0];
    let mut pw = C64::new(1.0, 0.0);
    for v in f.iter().take(start + 1).skip(1) {
        pw *= rot;
        sum += 2.0 * pw * v;
    }
    let scale = target / sum;
    let out: Vec<C64> = f[..=mmax as usize].iter().map(|v| v * scale).collect();
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(SpecFunError::Overflow { order: mmax, re: z.re, im: z.im });
    }
    Ok(out)
}

pub fn bessel_j(m: u32, z: C64) -> Result<C64, SpecFunError> {
    Ok(bessel_j_seq(m, z)?[m as usize])
}

/// `H^{(1)}_0(z) … H^{(1)}_{mmax}(z)` by forward recurrence.
pub fn hankel1_seq(mmax: u32, z: C64) -> Result<Vec<C64>, SpecFunError> {
    if mmax > MAX_ORDER {
        return Err(SpecFunError::Order(mmax));
    }
    if z.norm() == 0.0 {
        return Err(SpecFunError::Singular);
    }
    check_arg(z)?;
    if z.im < -5.0 {
        return Err(domain(z));
    }
    let c = cyl01(z);
    let mut out = Vec::with_capacity(mmax as usize + 1);
    out.push(c.h0());
    if mmax >= 1 {
        out.push(c.h1());
    }
    let inv = 1.0 / z;
    for k in 1..mmax as usize {
        let next = out[k] * (2.0 * k as f64) * inv - out[k - 1];
        out.push(next);
    }
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(SpecFunError::Overflow { order: mmax, re: z.re, im: z.im });
    }
    Ok(out)
}

pub fn hankel1(m: u32, z: C64) -> Result<C64, SpecFunError> {
    Ok(hankel1_seq(m, z)?[m as usize])
}

/// `Y_m(z) = (H^{(1)}_m − J_m)/i`.
pub fn bessel_y(m: u32, z: C64) -> Result<C64, SpecFunError> {
    if m <= 1 {
        if z.norm() == 0.0 {
            return Err(SpecFunError::Singular);
        }
        check_arg(z)?;
        let c = cyl01(z);
        return Ok(if m == 0 { c.y0 } else { c.y1 });
    }
    let h = hankel1(m, z)?;
    let j = bessel_j(m, z)?;
    Ok((h - j) * (-I))
}

/// `J_m'(z) = (J_{m−1} − J_{m+1})/2`, with `J_0' = −J_1`.
pub fn bessel_j_prime(m: u32, z: C64) -> Result<C64, SpecFunError> {
    let js = bessel_j_seq(m + 1, z)?;
    Ok(derivative_from_seq(&js, m as usize))
}

pub fn hankel1_prime(m: u32, z: C64) -> Result<C64, SpecFunError> {
    let hs = hankel1_seq(m + 1, z)?;
    Ok(derivative_from_seq(&hs, m as usize))
}

/// Derivative of order `m` from a sequence holding orders `0..=m+1`.
pub fn derivative_from_seq(seq: &[C64], m: usize) -> C64 {
    if m == 0 {
        -seq[1]
    } else {
        (seq[m - 1] - seq[m + 1]) * 0.5
    }
}

/// Real-axis `J_m(x)`.
pub fn bessel_j_real(m: u32, x: f64) -> Result<f64, SpecFunError> {
    Ok(bessel_j(m, C64::new(x, 0.0))?.re)
}

/// `ℓ`-th positive zero `j_{m,ℓ}` of `J_m`.
pub fn bessel_zero(m: u32, l: u32) -> Result<f64, SpecFunError> {
    if m > 50 || l == 0 || l > 20 {
        return Err(SpecFunError::Order(m.max(l)));
    }
    // All zeros exceed m; consecutive zeros are more than 2.5 apart.
    let step = 0.25;
    let mut x0 = (m as f64).max(step);
    let mut f0 = bessel_j_real(m, x0)?;
    let mut count = 0;
    let limit = m as f64 + 4.0 * (l as f64 + 2.0) * PI;
    while x0 < limit {
        let x1 = x0 + step;
        let f1 = bessel_j_real(m, x1)?;
        if f0 == 0.0 || f0.signum() != f1.signum() {
            count += 1;
            if count == l {
                return refine_zero(m, x0, x1, f0);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    Err(SpecFunError::Bracket { m, l })
}

fn refine_zero(m: u32, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<f64, SpecFunError> {
    if flo == 0.0 {
        return Ok(lo);
    }
    // Bisection to a tight bracket followed by Newton polish.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = bessel_j_real(m, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let f = bessel_j_real(m, x)?;
        let d = bessel_j_prime(m, C64::new(x, 0.0))?.re;
        let nx = x - f / d;
        if (nx - x).abs() > hi - lo {
            break;
        }
        x = nx;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_at_origin() {
        assert_eq!(bessel_j(0, C64::new(0.0, 0.0)).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(bessel_j(3, C64::new(0.0, 0.0)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn hankel_singular_at_origin() {
        assert_eq!(hankel1(0, C64::new(0.0, 0.0)), Err(SpecFunError::Singular));
    }

    #[test]
    fn domain_guards() {
        assert!(bessel_j(201, C64::new(1.0, 0.0)).is_err());
        assert!(bessel_j(0, C64::new(2e4, 0.0)).is_err());
        assert!(hankel1(0, C64::new(3.0, -6.0)).is_err());
        assert!(bessel_zero(51, 1).is_err());
        assert!(bessel_zero(0, 0).is_err());
    }

    #[test]
    fn series_and_asymptotic_agree_at_switch() {
        for &z in &[C64::new(12.0, 0.0), C64::new(11.9, -0.4), C64::new(-0.5, 11.99)] {
            if z.re <= 0.0 {
                continue;
            }
            let a = cyl01_series(z);
            let b = cyl01_asymptotic(z);
            for (x, y) in [(a.j0, b.j0), (a.j1, b.j1), (a.y0, b.y0), (a.y1, b.y1)] {
                assert!((x - y).norm() < 2e-10 * (1.0 + x.norm()), "{z}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn miller_matches_series_orders_0_1() {
        for &z in &[C64::new(3.0, -0.2), C64::new(7.5, 0.3), C64::new(11.0, -1.5)] {
            let js = bessel_j_seq(1, z).unwrap();
            let c = cyl01_series(z);
            assert!((js[0] - c.j0).norm() < 1e-12 * (1.0 + c.j0.norm()));
            assert!((js[1] - c.j1).norm() < 1e-12 * (1.0 + c.j1.norm()));
        }
    }

    #[test]
    fn bessel_zero_interlacing() {
        for m in 0..6 {
            for l in 1..5 {
                let a = bessel_zero(m, l).unwrap();
                let b = bessel_zero(m + 1, l).unwrap();
                let c = bessel_zero(m, l + 1).unwrap();
                assert!(a < b && b < c, "m={m} l={l}");
            }
        }
    }
}
