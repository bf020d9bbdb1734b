//! Billiard map in Birkhoff coordinates `(s, p = sin χ)`.
//!
//! Positive `p` means the outgoing chord leans in the counterclockwise
//! direction. The product of angular momenta about the two foci is the
//! conserved quantity of the elliptic billiard; its sign separates
//! whispering-gallery motion (`Λ > 0`) from bouncing-ball motion (`Λ < 0`).

use thiserror::Error;

use crate::geometry::{wrap_angle, EllipseGeometry};
use crate::scalar::{Real, Vec2};

/// Momenta closer than this to `±1` are treated as grazing.
pub const GRAZING_GUARD: f64 = 1e-9;
/// Minimum parameter separation between launch and landing points.
pub const CHORD_GUARD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error("tangential momentum {0} is grazing or outside [-1, 1]")]
    Grazing(f64),
    #[error("degenerate chord from t = {0}")]
    DegenerateChord(f64),
    #[error("bounce {index}: {source}")]
    AtBounce {
        index: usize,
        #[source]
        source: Box<RayError>,
    },
    #[error("separatrix undefined for the circle")]
    NoSeparatrix,
    #[error("refractive index {0} must exceed 1")]
    RefractiveIndex(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BirkhoffCoord<T> {
    pub s: T,
    pub p: T,
}

impl<T: Real> BirkhoffCoord<T> {
    pub fn new(s: T, p: T) -> Self {
        Self { s, p }
    }
}

#[derive(Clone, Debug)]
pub struct RayTrajectory<T> {
    pub geometry: EllipseGeometry<T>,
    pub points: Vec<BirkhoffCoord<T>>,
}

/// Separatrix sampled over `s`; each branch is the set of chords aimed at one
/// focus, with the momentum-reversed partners stored alongside.
#[derive(Clone, Debug)]
pub struct SeparatrixCurve<T> {
    pub s: Vec<T>,
    /// `[toward focus (−c,0), toward focus (c,0)]` momenta at each `s`.
    pub branches: [Vec<T>; 2],
}

impl<T: Real> SeparatrixCurve<T> {
    /// All `(s, p)` points of both branches and both momentum signs.
    pub fn points(&self) -> Vec<(T, T)> {
        let mut out = Vec::with_capacity(self.s.len() * 4);
        for br in &self.branches {
            for (&s, &p) in self.s.iter().zip(br) {
                out.push((s, p));
                out.push((s, -p));
            }
        }
        out
    }

    pub fn max_abs_p(&self) -> T {
        self.branches
            .iter()
            .flatten()
            .fold(T::zero(), |m, &p| m.max(p.abs()))
    }
}

/// Outgoing unit chord direction at parameter `t` for momentum `p`.
fn chord_direction<T: Real>(g: &EllipseGeometry<T>, t: T, p: T) -> Vec2<T> {
    let tg = g.tangent(t);
    let nin = g.inward_normal(t);
    tg.scale(p) + nin.scale((T::one() - p * p).sqrt())
}

fn check_momentum<T: Real>(p: T) -> Result<(), RayError> {
    if !(p.abs() <= T::one() - T::lit(GRAZING_GUARD)) {
        return Err(RayError::Grazing(p.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// One bounce in the `(t, p)` representation.
pub fn bounce_param<T: Real>(g: &EllipseGeometry<T>, t: T, p: T) -> Result<(T, T), RayError> {
    check_momentum(p)?;
    let x = g.position(t);
    let d = chord_direction(g, t, p);
    let (a2, b2) = (g.a * g.a, g.b * g.b);
    // Line-ellipse quadratic has the launch root λ = 0; take the other one.
    let lin = x.x * d.x / a2 + x.y * d.y / b2;
    let quad = d.x * d.x / a2 + d.y * d.y / b2;
    let lambda = -T::lit(2.0) * lin / quad;
    let y = x + d.scale(lambda);
    let t_new = wrap_angle((y.y / g.b).atan2(y.x / g.a));
    let dt = (t_new - wrap_angle(t)).abs();
    let dt = dt.min(T::TAU() - dt);
    if !(dt > T::lit(CHORD_GUARD)) {
        return Err(RayError::DegenerateChord(t.to_f64().unwrap_or(f64::NAN)));
    }
    // Specular reflection keeps the tangential component of the direction.
    let p_new = g.tangent(t_new).dot(d).max(-T::one()).min(T::one());
    Ok((t_new, p_new))
}

/// Next boundary collision in Birkhoff coordinates.
pub fn bounce_map<T: Real>(g: &EllipseGeometry<T>, x: BirkhoffCoord<T>) -> Result<BirkhoffCoord<T>, RayError> {
    let (t, p) = bounce_param(g, g.t_of_s(x.s), x.p)?;
    Ok(BirkhoffCoord::new(g.s_of_t(t), p))
}

/// `n` successive bounces; the returned trajectory holds `n + 1` points
/// starting with `x0`.
pub fn trace<T: Real>(g: &EllipseGeometry<T>, x0: BirkhoffCoord<T>, n: usize) -> Result<RayTrajectory<T>, RayError> {
    let mut points = Vec::with_capacity(n + 1);
    points.push(x0);
    let mut t = g.t_of_s(x0.s);
    let mut p = x0.p;
    for index in 0..n {
        let (tn, pn) = bounce_param(g, t, p).map_err(|e| RayError::AtBounce {
            index,
            source: Box::new(e),
        })?;
        t = tn;
        p = pn;
        points.push(BirkhoffCoord::new(g.s_of_t(t), p));
    }
    Ok(RayTrajectory { geometry: *g, points })
}

/// Product of the angular momenta of the outgoing chord about the two foci.
pub fn focal_invariant<T: Real>(g: &EllipseGeometry<T>, x: BirkhoffCoord<T>) -> T {
    focal_invariant_param(g, g.t_of_s(x.s), x.p)
}

pub fn focal_invariant_param<T: Real>(g: &EllipseGeometry<T>, t: T, p: T) -> T {
    let pos = g.position(t);
    let p = p.max(-T::one()).min(T::one());
    let d = chord_direction(g, t, p);
    let [f1, f2] = g.foci();
    (pos - f1).cross(d) * (pos - f2).cross(d)
}

/// Momenta of the two focal chords leaving the boundary point at `s`,
/// ordered `[toward (−c,0), toward (c,0)]`. Their negatives lie on the
/// separatrix as well.
pub fn separatrix_pair<T: Real>(g: &EllipseGeometry<T>, s: T) -> Result<[T; 2], RayError> {
    if g.is_circle() {
        return Err(RayError::NoSeparatrix);
    }
    let t = g.t_of_s(s);
    let x = g.position(t);
    let tg = g.tangent(t);
    let [f1, f2] = g.foci();
    Ok([tg.dot((f1 - x).normalized()), tg.dot((f2 - x).normalized())])
}

/// Every separatrix momentum at `s`: both focal branches and their
/// momentum-reversed partners.
pub fn separatrix_p<T: Real>(g: &EllipseGeometry<T>, s: T) -> Result<Vec<T>, RayError> {
    let [p1, p2] = separatrix_pair(g, s)?;
    Ok(vec![p1, p2, -p1, -p2])
}

/// Samples the separatrix at `samples` equally spaced cell-centred `s` values.
pub fn separatrix_curve<T: Real>(g: &EllipseGeometry<T>, samples: usize) -> Result<SeparatrixCurve<T>, RayError> {
    let mut s_vals = Vec::with_capacity(samples);
    let mut b1 = Vec::with_capacity(samples);
    let mut b2 = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = T::count(i) / T::count(samples);
        let [p1, p2] = separatrix_pair(g, s)?;
        s_vals.push(s);
        b1.push(p1);
        b2.push(p2);
    }
    Ok(SeparatrixCurve { s: s_vals, branches: [b1, b2] })
}

/// Total-internal-reflection threshold `1/n`.
pub fn critical_line<T: Real>(n: T) -> Result<T, RayError> {
    if !(n > T::one()) || !n.is_finite() {
        return Err(RayError::RefractiveIndex(n.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(T::one() / n)
}

/// Union of traced trajectories plus the seeds that failed.
#[derive(Clone, Debug)]
pub struct PsosSample<T> {
    pub points: Vec<BirkhoffCoord<T>>,
    pub failures: Vec<(usize, RayError)>,
}

/// Traces every seed for `n` bounces. Failing seeds are reported and
/// skipped; points traced before the failure are kept.
pub fn psos_sample<T: Real>(g: &EllipseGeometry<T>, seeds: &[BirkhoffCoord<T>], n: usize) -> PsosSample<T> {
    let mut points = Vec::with_capacity(seeds.len() * (n + 1));
    let mut failures = Vec::new();
    for (i, &seed) in seeds.iter().enumerate() {
        if n == 0 {
            points.push(seed);
            continue;
        }
        let mut t = g.t_of_s(seed.s);
        let mut p = seed.p;
        points.push(seed);
        for index in 0..n {
            match bounce_param(g, t, p) {
                Ok((tn, pn)) => {
                    t = tn;
                    p = pn;
                    points.push(BirkhoffCoord::new(g.s_of_t(t), p));
                }
                Err(e) => {
                    failures.push((i, RayError::AtBounce { index, source: Box::new(e) }));
                    break;
                }
            }
        }
    }
    PsosSample { points, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ell(e: f64) -> EllipseGeometry<f64> {
        EllipseGeometry::new(e, 1.0).unwrap()
    }

    #[test]
    fn circle_chord_geometry() {
        // Chord at incidence χ subtends a central angle π − 2χ.
        let g = ell(0.0);
        let x = bounce_map(&g, BirkhoffCoord::new(0.0, 0.5)).unwrap();
        let chi = 0.5f64.asin();
        let expected = (PI - 2.0 * chi) / (2.0 * PI);
        assert!((x.s - expected).abs() < 1e-14);
        assert!((x.s - 1.0 / 3.0).abs() < 1e-14);
        assert!((x.p - 0.5).abs() < 1e-14);
    }

    #[test]
    fn circle_diameter() {
        let g = ell(0.0);
        for &s in &[0.0, 0.1, 0.77] {
            let x = bounce_map(&g, BirkhoffCoord::new(s, 0.0)).unwrap();
            assert!(((x.s - (s + 0.5).rem_euclid(1.0)).abs()) < 1e-14);
            assert!(x.p.abs() < 1e-15);
        }
    }

    #[test]
    fn minor_axis_two_bounce_orbit() {
        let g = ell(0.4);
        let x = bounce_map(&g, BirkhoffCoord::new(0.25, 0.0)).unwrap();
        assert!((x.s - 0.75).abs() < 1e-14);
        assert!(x.p.abs() < 1e-14);
    }

    #[test]
    fn grazing_rejected() {
        let g = ell(0.3);
        assert!(matches!(bounce_map(&g, BirkhoffCoord::new(0.1, 1.0)), Err(RayError::Grazing(_))));
        assert!(matches!(bounce_map(&g, BirkhoffCoord::new(0.1, -1.2)), Err(RayError::Grazing(_))));
        let err = trace(&g, BirkhoffCoord::new(0.1, 1.0), 3).unwrap_err();
        assert!(matches!(err, RayError::AtBounce { index: 0, .. }));
    }

    #[test]
    fn circle_momentum_conserved() {
        let g = ell(0.0);
        let tr = trace(&g, BirkhoffCoord::new(0.2, 0.5), 3).unwrap();
        assert_eq!(tr.points.len(), 4);
        assert!(tr.points.iter().all(|x| (x.p - 0.5).abs() < 1e-14));
    }

    #[test]
    fn focal_invariant_examples() {
        let g = ell(0.0);
        for &(s, p) in &[(0.1, 0.3), (0.6, -0.8), (0.0, 0.0)] {
            assert!(focal_invariant(&g, BirkhoffCoord::new(s, p)) >= 0.0);
        }
        let g = ell(0.6);
        // Minor-axis orbit: the chord passes at distance c from both foci.
        let lam = focal_invariant(&g, BirkhoffCoord::new(0.25, 0.0));
        assert!((lam + g.c * g.c).abs() < 1e-14);
        assert!((g.c - g.a * 0.6).abs() < 1e-15);
        let lam = focal_invariant(&g, BirkhoffCoord::new(0.25, 0.6));
        assert!(lam.abs() < 1e-14);
    }

    #[test]
    fn separatrix_values() {
        let g = ell(0.3);
        let ps = separatrix_p(&g, 0.25).unwrap();
        let max = ps.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        assert!((max - 0.3).abs() < 1e-14);
        let ps = separatrix_p(&g, 0.0).unwrap();
        assert!(ps.iter().all(|p| p.abs() < 1e-15));
        assert!(matches!(separatrix_p(&ell(0.0), 0.1), Err(RayError::NoSeparatrix)));
    }

    #[test]
    fn critical_line_values() {
        assert!((critical_line(3.3_f64).unwrap() - 0.303_030_303_030_303).abs() < 1e-15);
        assert_eq!(critical_line(2.0).unwrap(), 0.5);
        assert!((critical_line(1.0_f64 + 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(critical_line(1.0).is_err());
        assert!(critical_line(0.5).is_err());
    }

    #[test]
    fn psos_zero_bounces_returns_seeds() {
        let g = ell(0.4);
        let seeds = vec![BirkhoffCoord::new(0.1, 0.2), BirkhoffCoord::new(0.3, -0.4)];
        let out = psos_sample(&g, &seeds, 0);
        assert_eq!(out.points, seeds);
        assert!(out.failures.is_empty());
    }

    #[test]
    fn psos_reports_failed_seeds() {
        let g = ell(0.4);
        let seeds = vec![BirkhoffCoord::new(0.1, 0.2), BirkhoffCoord::new(0.3, 1.0)];
        let out = psos_sample(&g, &seeds, 5);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, 1);
        assert_eq!(out.points.len(), 6 + 1);
    }
}
