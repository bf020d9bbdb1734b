//! Elliptic boundary with an area-preserving scale convention.
//!
//! Every ellipse in the family has area `πR²`, so `a·b = R²` and `kR`
//! values stay comparable as the eccentricity changes. The boundary is
//! parametrized by the angular parameter `t` with position `(a cos t, b sin t)`;
//! the normalized arclength `s ∈ [0, 1)` is measured counterclockwise from
//! the positive major-axis endpoint.

use thiserror::Error;

use crate::scalar::{Real, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("eccentricity {0} outside [0, 1)")]
    Eccentricity(f64),
    #[error("reference length {0} must be positive")]
    Scale(f64),
}

/// Ellipse of eccentricity `e` and circle-equivalent radius `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseGeometry<T> {
    pub e: T,
    pub r: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub perimeter: T,
}

/// Position, inward unit normal, normalized arclength and curvature at one
/// boundary parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint<T> {
    pub position: Vec2<T>,
    pub inward_normal: Vec2<T>,
    pub s: T,
    pub curvature: T,
}

impl<T: Real> EllipseGeometry<T> {
    /// Builds the ellipse with `a = R/(1−e²)^{1/4}` and `b = R(1−e²)^{1/4}`.
    pub fn new(e: T, r: T) -> Result<Self, GeometryError> {
        if !(e >= T::zero() && e < T::one()) {
            return Err(GeometryError::Eccentricity(e.to_f64().unwrap_or(f64::NAN)));
        }
        if !(r > T::zero()) || !r.is_finite() {
            return Err(GeometryError::Scale(r.to_f64().unwrap_or(f64::NAN)));
        }
        let q = (T::one() - e * e).sqrt().sqrt();
        let a = r / q;
        let b = r * q;
        let c = a * e;
        let perimeter = T::lit(4.0) * a * complete_e(e);
        Ok(Self { e, r, a, b, c, perimeter })
    }

    pub fn is_circle(&self) -> bool {
        self.c == T::zero()
    }

    /// Foci `(−c, 0)` and `(c, 0)`.
    pub fn foci(&self) -> [Vec2<T>; 2] {
        [Vec2::new(-self.c, T::zero()), Vec2::new(self.c, T::zero())]
    }

    #[inline]
    pub fn position(&self, t: T) -> Vec2<T> {
        Vec2::new(self.a * t.cos(), self.b * t.sin())
    }

    /// Derivative of the position with respect to `t`.
    #[inline]
    pub fn velocity(&self, t: T) -> Vec2<T> {
        Vec2::new(-self.a * t.sin(), self.b * t.cos())
    }

    #[inline]
    pub fn acceleration(&self, t: T) -> Vec2<T> {
        Vec2::new(-self.a * t.cos(), -self.b * t.sin())
    }

    /// Parametric speed `|dr/dt|`.
    #[inline]
    pub fn speed(&self, t: T) -> T {
        self.velocity(t).norm()
    }

    /// Counterclockwise unit tangent.
    #[inline]
    pub fn tangent(&self, t: T) -> Vec2<T> {
        self.velocity(t).normalized()
    }

    /// Unit normal pointing into the domain.
    #[inline]
    pub fn inward_normal(&self, t: T) -> Vec2<T> {
        let tg = self.tangent(t);
        Vec2::new(-tg.y, tg.x)
    }

    pub fn curvature(&self, t: T) -> T {
        let sp = self.speed(t);
        self.a * self.b / (sp * sp * sp)
    }

    /// Arclength from the major-axis endpoint to parameter `t` (any real `t`,
    /// continuous and strictly increasing).
    pub fn arclength(&self, t: T) -> T {
        let half_pi = T::FRAC_PI_2();
        self.a * (complete_e(self.e) - incomplete_e(half_pi - t, self.e))
    }

    /// Normalized arclength in `[0, 1)` for parameter `t` (wrapped mod 2π).
    pub fn s_of_t(&self, t: T) -> T {
        let t = wrap_angle(t);
        let s = self.arclength(t) / self.perimeter;
        if s >= T::one() {
            s - T::one()
        } else {
            s
        }
    }

    /// Inverts [`Self::s_of_t`]; `s` is wrapped into `[0, 1)`.
    pub fn t_of_s(&self, s: T) -> T {
        let s = s - s.floor();
        if self.is_circle() {
            return s * T::TAU();
        }
        let target = s * self.perimeter;
        let mut lo = T::zero();
        let mut hi = T::TAU();
        let mut t = s * T::TAU();
        let tol = T::epsilon() * T::lit(8.0);
        for _ in 0..100 {
            let f = self.arclength(t) - target;
            if f > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let step = f / self.speed(t);
            let mut next = t - step;
            if !(next > lo && next < hi) {
                next = (lo + hi) * T::lit(0.5);
            }
            if (next - t).abs() <= tol * (T::one() + t.abs()) {
                return next;
            }
            t = next;
        }
        t
    }

    /// Boundary data at parameter `t` (wrapped mod 2π).
    pub fn boundary_point(&self, t: T) -> BoundaryPoint<T> {
        let t = wrap_angle(t);
        BoundaryPoint {
            position: self.position(t),
            inward_normal: self.inward_normal(t),
            s: self.s_of_t(t),
            curvature: self.curvature(t),
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(t: T) -> T {
    let tau = T::TAU();
    let w = t - (t / tau).floor() * tau;
    if w >= tau || w < T::zero() {
        T::zero()
    } else {
        w
    }
}

/// Complete elliptic integral of the second kind `E(k)` (modulus `k`).
pub fn complete_e<T: Real>(k: T) -> T {
    let y = T::one() - k * k;
    carlson_rf(T::zero(), y, T::one()) - k * k / T::lit(3.0) * carlson_rd(T::zero(), y, T::one())
}

/// Incomplete elliptic integral of the second kind `E(φ, k)` for any real `φ`.
pub fn incomplete_e<T: Real>(phi: T, k: T) -> T {
    let pi = T::PI();
    let j = (phi / pi).round();
    let phi0 = phi - j * pi;
    let (s, c) = phi0.sin_cos();
    let y = T::one() - k * k * s * s;
    let e0 = s * carlson_rf(c * c, y, T::one())
        - k * k / T::lit(3.0) * s * s * s * carlson_rd(c * c, y, T::one());
    T::lit(2.0) * j * complete_e(k) + e0
}

/// Carlson's symmetric integral `R_F(x, y, z)` by duplication.
pub fn carlson_rf<T: Real>(x: T, y: T, z: T) -> T {
    let errtol = T::epsilon().powf(T::lit(1.0 / 6.0));
    let third = T::lit(1.0 / 3.0);
    let quarter = T::lit(0.25);
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        x = (x + lam) * quarter;
        y = (y + lam) * quarter;
        z = (z + lam) * quarter;
        let ave = third * (x + y + z);
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < errtol {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (T::one() + (T::lit(1.0 / 24.0) * e2 - T::lit(0.1) - T::lit(3.0 / 44.0) * e3) * e2
                + T::lit(1.0 / 14.0) * e3)
                / ave.sqrt();
        }
    }
}

/// Carlson's symmetric integral `R_D(x, y, z)` by duplication.
pub fn carlson_rd<T: Real>(x: T, y: T, z: T) -> T {
    let errtol = T::lit(0.6) * T::epsilon().powf(T::lit(1.0 / 6.0));
    let quarter = T::lit(0.25);
    let (c1, c2, c3, c4) = (T::lit(3.0 / 14.0), T::lit(1.0 / 6.0), T::lit(9.0 / 22.0), T::lit(3.0 / 26.0));
    let (c5, c6) = (T::lit(0.25 * 9.0 / 22.0), T::lit(1.5 * 3.0 / 26.0));
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = T::zero();
    let mut fac = T::one();
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        sum = sum + fac / (sz * (z + lam));
        fac = fac * quarter;
        x = (x + lam) * quarter;
        y = (y + lam) * quarter;
        z = (z + lam) * quarter;
        let ave = T::lit(0.2) * (x + y + T::lit(3.0) * z);
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < errtol {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - T::lit(6.0) * eb;
            let ee = ed + ec + ec;
            return T::lit(3.0) * sum
                + fac
                    * (T::one()
                        + ed * (-c1 + c5 * ed - c6 * dz * ee)
                        + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea)))
                    / (ave * ave.sqrt());
        }
    }
}
