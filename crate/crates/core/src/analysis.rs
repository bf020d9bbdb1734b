//! Self-energy curves, pairwise comparison of decay channels and phase-space
//! classification of modes.
//!
//! The self-energy of a label is `S_e = Re kR_closed − Re kR_open`, where the
//! closed reference is the billiard filled with the same index `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::EllipseGeometry;
use crate::husimi::{husimi_incident, restrict_below_critical, HusimiError, HusimiGrid, HusimiMap, Restriction};
use crate::raydyn::focal_invariant_param;
use crate::scalar::Real;
use crate::tracker::ModeTrajectory;
use crate::wavesolver::{quality_factor_of, Kind, ModeLabel};

/// Floor on the Bhattacharyya coefficient.
pub const EPS_KAPPA: f64 = 1e-300;
/// Default SB/UB split as a fraction of the island depth.
pub const DEFAULT_TAU: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Husimi(#[from] HusimiError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergySeries {
    pub label: ModeLabel,
    pub e_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SelfEnergySeries {
    /// `S_e(last) − S_e(first)`.
    pub fn swing(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Mean `|dS_e/de|` over the grid points inside `[lo, hi]`.
    pub fn mean_abs_slope(&self, lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = (0..self.e_grid.len()).filter(|&i| self.e_grid[i] >= lo - 1e-12 && self.e_grid[i] <= hi + 1e-12).collect();
        if idx.len() < 2 {
            return 0.0;
        }
        let total: f64 = idx.windows(2).map(|w| (self.values[w[1]] - self.values[w[0]]).abs()).sum();
        total / (self.e_grid[idx[idx.len() - 1]] - self.e_grid[idx[0]])
    }

    /// Keeps the points with `e ≤ e_max`.
    pub fn truncated(&self, e_max: f64) -> Self {
        let n = self.e_grid.iter().take_while(|&&e| e <= e_max + 1e-12).count();
        Self { label: self.label, e_grid: self.e_grid[..n].to_vec(), values: self.values[..n].to_vec() }
    }
}

/// Pointwise `Re kR_closed − Re kR_open` over the common solved grid.
pub fn self_energy(closed: &ModeTrajectory, open: &ModeTrajectory) -> Result<SelfEnergySeries, AnalysisError> {
    if closed.kind != Kind::Closed || open.kind != Kind::Open {
        return Err(AnalysisError::Domain("need one closed and one open trajectory".into()));
    }
    if closed.label != open.label {
        return Err(AnalysisError::Domain(format!("label mismatch: {} vs {}", closed.label, open.label)));
    }
    if closed.e_grid != open.e_grid {
        return Err(AnalysisError::Domain("closed and open trajectories on different grids".into()));
    }
    let values = closed.k.iter().zip(&open.k).map(|(c, o)| c.re - o.re).collect();
    Ok(SelfEnergySeries { label: closed.label, e_grid: closed.e_grid.clone(), values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSelfEnergy {
    pub e_grid: Vec<f64>,
    /// `S_e,a − S_e,b`.
    pub signed: Vec<f64>,
    /// `|S_e,a − S_e,b|`.
    pub delta: Vec<f64>,
    pub zeros: Vec<f64>,
    /// Both inputs identical; every grid point counts as a crossing.
    pub degenerate: bool,
}

/// Zero crossings of a sampled signed curve, linearly interpolated.
pub fn zero_crossings(e: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..v.len() {
        if v[i] == 0.0 {
            out.push(e[i]);
        } else if i + 1 < v.len() && v[i + 1] != 0.0 && (v[i] > 0.0) != (v[i + 1] > 0.0) {
            out.push(e[i] + (e[i + 1] - e[i]) * v[i] / (v[i] - v[i + 1]));
        }
    }
    out
}

pub fn delta_self_energy(a: &SelfEnergySeries, b: &SelfEnergySeries) -> Result<DeltaSelfEnergy, AnalysisError> {
    if a.e_grid != b.e_grid {
        return Err(AnalysisError::Domain("self-energy series on different grids".into()));
    }
    let signed: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let delta = signed.iter().map(|d| d.abs()).collect();
    let degenerate = signed.iter().all(|&d| d == 0.0);
    let zeros = zero_crossings(&a.e_grid, &signed);
    Ok(DeltaSelfEnergy { e_grid: a.e_grid.clone(), signed, delta, zeros, degenerate })
}

/// Bhattacharyya distance of two cell-mass vectors.
pub fn bhattacharyya_masses<T: Real>(p: &[T], q: &[T]) -> Result<T, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::Domain("distributions of different length".into()));
    }
    if p.iter().chain(q).any(|&x| !(x >= T::zero())) {
        return Err(AnalysisError::Domain("negative or non-finite mass".into()));
    }
    // Summation order is fixed and symmetric in (p, q).
    let kappa = p.iter().zip(q).fold(T::zero(), |acc, (&a, &b)| acc + (a * b).sqrt());
    let floor = T::from_f64(EPS_KAPPA).filter(|v| *v > T::zero()).unwrap_or_else(T::min_positive_value);
    Ok((-(kappa.max(floor)).ln()).max(T::zero()))
}

/// `D_B = −ln Σ √(m_p m_q)` over cell masses of two normalized maps.
pub fn bhattacharyya<T: Real>(p: &HusimiMap<T>, q: &HusimiMap<T>) -> Result<T, AnalysisError> {
    if !p.same_grid(q) {
        return Err(AnalysisError::Domain("Husimi maps on different grids".into()));
    }
    if p.restriction != q.restriction {
        return Err(AnalysisError::Domain("Husimi maps with different restrictions".into()));
    }
    if !p.normalized || !q.normalized {
        return Err(AnalysisError::Domain("Husimi maps must be normalized".into()));
    }
    bhattacharyya_masses(&p.cell_masses(), &q.cell_masses())
}

/// Per-label inputs of a pair comparison on the self-energy region.
#[derive(Clone, Debug)]
pub struct ModeAnalysis {
    pub label: ModeLabel,
    pub self_energy: SelfEnergySeries,
    /// Quality factor of the open resonance at each grid point.
    pub q: Vec<f64>,
    /// Decay channel (restricted Husimi map) per grid point; `None` if empty.
    pub channels: Vec<Option<HusimiMap<f64>>>,
}

/// Self-energy, Q and decay channels of one label for `e ≤ e_max`.
pub fn analyze_mode(
    closed: &ModeTrajectory,
    open: &ModeTrajectory,
    grid: HusimiGrid,
    p_c: f64,
    e_max: f64,
) -> Result<ModeAnalysis, AnalysisError> {
    let se = self_energy(closed, open)?.truncated(e_max);
    let n = se.e_grid.len();
    let q = open.k[..n].iter().map(|&k| quality_factor_of(k).unwrap_or(f64::NAN)).collect();
    let channels: Result<Vec<_>, AnalysisError> = open.resonances[..n]
        .par_iter()
        .map(|r| {
            let h = husimi_incident(r, grid)?;
            match restrict_below_critical(&h, p_c) {
                Ok(c) => Ok(Some(c)),
                Err(HusimiError::EmptyChannel(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    Ok(ModeAnalysis { label: closed.label, self_energy: se, q, channels: channels? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub labels: (ModeLabel, ModeLabel),
    pub e_grid: Vec<f64>,
    pub delta_se: Vec<f64>,
    /// `S_e,j − S_e,k`, whose sign changes locate `e_zero`.
    pub signed_se: Vec<f64>,
    /// `None` where either decay channel is empty.
    pub d_b: Vec<Option<f64>>,
    pub e_zero: Vec<f64>,
    pub e_dbmin: Option<f64>,
    pub q_j: Vec<f64>,
    pub q_k: Vec<f64>,
    pub degenerate: bool,
}

impl PairComparison {
    /// Smallest `D_B` over the valid points.
    pub fn min_d_b(&self) -> Option<f64> {
        self.d_b.iter().flatten().cloned().reduce(f64::min)
    }
}

/// Location of the minimum of a sampled curve, refined by the parabola through
/// the minimum and its neighbours when they are valid.
pub fn argmin_refined(e: &[f64], v: &[Option<f64>]) -> Option<f64> {
    let (i, _) = v
        .iter()
        .enumerate()
        .filter_map(|(i, x)| x.map(|x| (i, x)))
        .fold(None, |best: Option<(usize, f64)>, (i, x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((i, x)),
        })?;
    if i == 0 || i + 1 >= v.len() {
        return Some(e[i]);
    }
    let (Some(y0), Some(y1), Some(y2)) = (v[i - 1], v[i], v[i + 1]) else { return Some(e[i]) };
    let (x0, x1, x2) = (e[i - 1], e[i], e[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv > 0.0) {
        return Some(x1);
    }
    // Vertex of the interpolating parabola.
    let vertex = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    Some(vertex.clamp(x0, x2))
}

pub fn compare_pair(j: &ModeAnalysis, k: &ModeAnalysis) -> Result<PairComparison, AnalysisError> {
    let n = j.self_energy.e_grid.len().min(k.self_energy.e_grid.len());
    if j.self_energy.e_grid[..n] != k.self_energy.e_grid[..n] {
        return Err(AnalysisError::Domain("pair members on different grids".into()));
    }
    let cut = |s: &SelfEnergySeries| SelfEnergySeries { label: s.label, e_grid: s.e_grid[..n].to_vec(), values: s.values[..n].to_vec() };
    let (sj, sk) = (cut(&j.self_energy), cut(&k.self_energy));
    let delta = delta_self_energy(&sj, &sk)?;
    let same = j.label == k.label;
    let d_b: Vec<Option<f64>> = (0..n)
        .map(|i| match (&j.channels[i], &k.channels[i]) {
            (Some(p), Some(q)) => bhattacharyya(p, q).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_, _>>()?;
    let e_dbmin = argmin_refined(&sj.e_grid, &d_b);
    Ok(PairComparison {
        labels: (j.label, k.label),
        e_grid: sj.e_grid.clone(),
        delta_se: delta.delta,
        signed_se: delta.signed,
        d_b,
        e_zero: delta.zeros,
        e_dbmin,
        q_j: j.q[..n].to_vec(),
        q_k: k.q[..n].to_vec(),
        degenerate: same || delta.degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeClass {
    /// Whispering gallery.
    WG,
    /// Stable bouncing ball.
    SB,
    /// Unstable bouncing ball.
    UB,
}

impl std::fmt::Display for ModeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeClass::WG => "WG",
            ModeClass::SB => "SB",
            ModeClass::UB => "UB",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ModeClass,
    pub wg: f64,
    pub sb: f64,
    pub ub: f64,
}

/// Region of phase space holding the largest Husimi mass, with the focal
/// invariant scaled by its island-centre value `−c²`.
pub fn classify_mode<T: Real>(h: &HusimiMap<T>, g: &EllipseGeometry<T>, tau: T) -> Result<Classification, AnalysisError> {
    if g.is_circle() {
        return Err(AnalysisError::Domain("classification undefined for the circle".into()));
    }
    if !h.normalized || h.restriction != Restriction::None {
        return Err(AnalysisError::Domain("classification needs a normalized, unrestricted map".into()));
    }
    if !(tau > T::zero() && tau < T::one()) {
        return Err(AnalysisError::Domain("tau must lie in (0, 1)".into()));
    }
    let c2 = g.c * g.c;
    let (mut wg, mut sb, mut ub) = (T::zero(), T::zero(), T::zero());
    let area = h.cell_area();
    for i in 0..h.ns {
        let t = g.t_of_s(h.s_center(i));
        for jdx in 0..h.np {
            let m = h.get(i, jdx) * area;
            let lambda = focal_invariant_param(g, t, h.p_center(jdx)) / c2;
            if lambda > T::zero() {
                wg = wg + m;
            } else if lambda <= -tau {
                sb = sb + m;
            } else {
                ub = ub + m;
            }
        }
    }
    let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
    let (wg, sb, ub) = (f(wg), f(sb), f(ub));
    let class = if wg >= sb && wg >= ub {
        ModeClass::WG
    } else if sb >= ub {
        ModeClass::SB
    } else {
        ModeClass::UB
    };
    Ok(Classification { class, wg, sb, ub })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> SelfEnergySeries {
        SelfEnergySeries {
            label: ModeLabel::new(3, 1),
            e_grid: (0..values.len()).map(|i| i as f64 * 0.1).collect(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn one_dimensional_fixture() {
        // p uniform on [0,1], q uniform on [0,0.5], on 1000 cells.
        let n = 1000;
        let p: Vec<f64> = vec![1.0 / n as f64; n];
        let q: Vec<f64> = (0..n).map(|i| if i < n / 2 { 2.0 / n as f64 } else { 0.0 }).collect();
        let d = bhattacharyya_masses(&p, &q).unwrap();
        assert!((d - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!((d - 0.34657).abs() < 1e-5);
    }

    #[test]
    fn disjoint_supports_clamp() {
        let d = bhattacharyya_masses(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((d + EPS_KAPPA.ln()).abs() < 1e-9);
        assert_eq!(bhattacharyya_masses(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn map_checks() {
        let mut p = HusimiMap::<f64>::from_fn(8, 64, |_, _| 1.0);
        let mut q = HusimiMap::<f64>::from_fn(8, 64, |s, _| s);
        assert!(bhattacharyya(&p, &q).is_err());
        p.normalize().unwrap();
        q.normalize().unwrap();
        let a = bhattacharyya(&p, &q).unwrap();
        assert_eq!(a, bhattacharyya(&q, &p).unwrap());
        assert!(a > 0.0);
        let r = restrict_below_critical(&p, 0.3).unwrap();
        assert!(bhattacharyya(&r, &q).is_err());
        let mut c = HusimiMap::<f64>::from_fn(4, 64, |_, _| 1.0);
        c.normalize().unwrap();
        assert!(bhattacharyya(&c, &q).is_err());
    }

    #[test]
    fn delta_and_zero_crossings() {
        let a = series(&[1.0, 0.8, 0.6, 0.4]);
        let b = series(&[0.5, 0.6, 0.7, 0.8]);
        let d = delta_self_energy(&a, &b).unwrap();
        assert_eq!(d.zeros.len(), 1);
        // a − b = 0.5, 0.2, −0.1, −0.4: zero at 0.1 + 0.1·(0.2/0.3).
        assert!((d.zeros[0] - (0.1 + 0.1 * 2.0 / 3.0)).abs() < 1e-12);
        assert!(!d.degenerate);
        let same = delta_self_energy(&a, &a).unwrap();
        assert!(same.degenerate);
        assert_eq!(same.zeros.len(), 4);
        assert!(same.delta.iter().all(|&x| x == 0.0));
        let mut c = series(&[1.0, 2.0, 3.0]);
        c.e_grid[1] = 0.15;
        assert!(delta_self_energy(&a, &c).is_err());
    }

    #[test]
    fn slopes_and_swing() {
        let s = series(&[0.0, 0.0, 0.1, 0.3, 0.6]);
        assert!((s.swing() - 0.6).abs() < 1e-15);
        assert!((s.mean_abs_slope(0.2, 0.4) - 2.5).abs() < 1e-12);
        assert_eq!(s.truncated(0.25).e_grid.len(), 3);
    }

    #[test]
    fn argmin_parabola() {
        let e: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let v: Vec<Option<f64>> = e.iter().map(|&x| Some((x - 0.43) * (x - 0.43) + 1.0)).collect();
        assert!((argmin_refined(&e, &v).unwrap() - 0.43).abs() < 1e-12);
        let mut w = v.clone();
        w[4] = None;
        assert!(argmin_refined(&e, &w).is_some());
        assert_eq!(argmin_refined(&e, &vec![None; 11]), None);
    }

    #[test]
    fn classification_regions() {
        let g = EllipseGeometry::new(0.6, 1.0).unwrap();
        // Mass concentrated at high |p|: whispering gallery.
        let mut h = HusimiMap::<f64>::from_fn(64, 64, |_, p| if p.abs() > 0.9 { 1.0 } else { 0.0 });
        h.normalize().unwrap();
        assert_eq!(classify_mode(&h, &g, DEFAULT_TAU).unwrap().class, ModeClass::WG);
        // Around the minor-axis orbit (s = 1/4, p = 0): stable island.
        let mut h = HusimiMap::<f64>::from_fn(64, 64, |s, p| {
            if ((s - 0.25).abs() < 0.03 || (s - 0.75).abs() < 0.03) && p.abs() < 0.05 { 1.0 } else { 0.0 }
        });
        h.normalize().unwrap();
        assert_eq!(classify_mode(&h, &g, DEFAULT_TAU).unwrap().class, ModeClass::SB);
        // Thin band just inside the separatrix: unstable neighbourhood.
        let c2 = g.c * g.c;
        let mut h = HusimiMap::<f64>::from_fn(64, 64, |s, p| {
            let l = focal_invariant_param(&g, g.t_of_s(s), p) / c2;
            if l < -0.02 && l > -0.2 { 1.0 } else { 0.0 }
        });
        h.normalize().unwrap();
        let cl = classify_mode(&h, &g, DEFAULT_TAU).unwrap();
        assert_eq!(cl.class, ModeClass::UB);
        assert!((cl.wg + cl.sb + cl.ub - 1.0).abs() < 1e-12);
        let c = EllipseGeometry::new(0.0, 1.0).unwrap();
        assert!(classify_mode(&h, &c, DEFAULT_TAU).is_err());
    }
}
