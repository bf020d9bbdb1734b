//! Boundary Husimi distributions on the `(s, p)` phase space.
//!
//! `s ∈ [0, 1)` is arclength over perimeter and `p = sin χ ∈ [−1, 1]`. Cells
//! are indexed `(i, j)` with centres `s_i = (i + ½)/N_s` and
//! `p_j = −1 + (j + ½)·2/N_p`; weights are densities, so the mass of a cell is
//! its weight times [`HusimiMap::cell_area`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::specfun::C64;
use crate::wavesolver::{Kind, Resonance};

/// Floor on `cos χ` in the interface weight.
pub const EPS_F: f64 = 1e-3;
/// Smallest accepted momentum resolution.
pub const MIN_NP: usize = 64;
/// Winding images of the periodized wave packet.
pub const IMAGES: i32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HusimiError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("inconsistent boundary data: {0}")]
    Inconsistent(String),
    #[error("no Husimi mass below p_c = {0}")]
    EmptyChannel(f64),
    #[error("{0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction<T> {
    None,
    BelowCritical(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HusimiMap<T> {
    pub ns: usize,
    pub np: usize,
    /// Densities, `weights[i * np + j]` for cell `(s_i, p_j)`.
    pub weights: Vec<T>,
    pub normalized: bool,
    pub restriction: Restriction<T>,
}

impl<T: Real> HusimiMap<T> {
    pub fn zeros(ns: usize, np: usize) -> Self {
        Self { ns, np, weights: vec![T::zero(); ns * np], normalized: false, restriction: Restriction::None }
    }

    /// Map with weights `f(s, p)` at the cell centres.
    pub fn from_fn(ns: usize, np: usize, f: impl Fn(T, T) -> T) -> Self {
        let mut h = Self::zeros(ns, np);
        for i in 0..ns {
            for j in 0..np {
                h.weights[i * np + j] = f(h.s_center(i), h.p_center(j));
            }
        }
        h
    }

    pub fn s_center(&self, i: usize) -> T {
        (T::count(i) + T::lit(0.5)) / T::count(self.ns)
    }

    pub fn p_center(&self, j: usize) -> T {
        -T::one() + (T::count(j) + T::lit(0.5)) * T::lit(2.0) / T::count(self.np)
    }

    pub fn cell_area(&self) -> T {
        T::lit(2.0) / (T::count(self.ns) * T::count(self.np))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.weights[i * self.np + j]
    }

    /// Total mass `Σ w · ΔsΔp`.
    pub fn mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w) * self.cell_area()
    }

    /// Mass of every cell.
    pub fn cell_masses(&self) -> Vec<T> {
        let a = self.cell_area();
        self.weights.iter().map(|&w| w * a).collect()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.ns == other.ns && self.np == other.np
    }

    /// Rescales to unit mass.
    pub fn normalize(&mut self) -> Result<(), HusimiError> {
        if self.weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(HusimiError::Domain("weights must be finite and nonnegative".into()));
        }
        let m = self.mass();
        if !(m > T::zero()) {
            return Err(HusimiError::Domain("map has zero mass".into()));
        }
        for w in &mut self.weights {
            *w = *w / m;
        }
        self.normalized = true;
        Ok(())
    }

    /// Conservative coarsening by `factor` in both directions: each coarse
    /// cell carries the summed mass of its fine cells.
    pub fn down_bin(&self, factor: usize) -> Result<Self, HusimiError> {
        if factor == 0 || self.ns % factor != 0 || self.np % factor != 0 {
            return Err(HusimiError::Config(format!("cannot bin {}×{} by {factor}", self.ns, self.np)));
        }
        let (ns, np) = (self.ns / factor, self.np / factor);
        let mut out = Self::zeros(ns, np);
        let inv = T::one() / T::count(factor * factor);
        for i in 0..self.ns {
            for j in 0..self.np {
                let k = (i / factor) * np + j / factor;
                out.weights[k] = out.weights[k] + self.get(i, j) * inv;
            }
        }
        out.normalized = self.normalized;
        out.restriction = self.restriction;
        Ok(out)
    }
}

/// Husimi grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub ns: usize,
    pub np: usize,
}

impl Default for HusimiGrid {
    fn default() -> Self {
        Self { ns: 256, np: 256 }
    }
}

/// Width of the boundary wave packet in arclength units.
pub fn packet_width(perimeter: f64, nk: f64) -> f64 {
    (2.0 * perimeter / nk).sqrt()
}

/// Incident Husimi distribution on the interior side of the boundary,
/// normalized to unit mass.
///
/// `h₀` and `h₁` are overlaps of `ψ` and `∂_νψ/(nk)` (outward normal) with
/// the periodized packet `exp(i nk p Δ − Δ²/(2σ²))`, `Δ = s′ − s` in
/// arclength. The incoming plane-wave component is `F h₀ − (i/F) h₁` with
/// `F = √max(cos χ, ε_F)`.
pub fn husimi_incident(r: &Resonance, grid: HusimiGrid) -> Result<HusimiMap<f64>, HusimiError> {
    if grid.np < MIN_NP || grid.ns == 0 {
        return Err(HusimiError::Config(format!("grid {}×{} too coarse (need N_p ≥ {MIN_NP})", grid.ns, grid.np)));
    }
    let b = &r.boundary;
    let nodes = b.psi.len();
    if nodes == 0 || b.dpsi.len() != nodes || b.s.len() != nodes || b.ds.len() != nodes {
        return Err(HusimiError::Inconsistent("boundary arrays are empty or of unequal length".into()));
    }
    let nk = r.n * r.k.re;
    if !(nk > 0.0) {
        return Err(HusimiError::Domain(format!("wavenumber n·Re kR = {nk} must be positive")));
    }
    let closed = r.kind == Kind::Closed;
    if closed {
        let scale = b.dpsi.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if b.psi.iter().any(|z| z.norm() > 1e-12 * scale.max(1.0)) {
            return Err(HusimiError::Inconsistent("closed mode with nonzero boundary field".into()));
        }
    }
    let perimeter = r.geometry.perimeter;
    let sigma = packet_width(perimeter, nk);
    let x: Vec<f64> = b.s.iter().map(|s| s * perimeter).collect();
    let h1_data: Vec<C64> = b.dpsi.iter().map(|z| z / nk).collect();
    let mut map = HusimiMap::<f64>::zeros(grid.ns, grid.np);
    let dp = 2.0 / grid.np as f64;
    let p0 = map.p_center(0);
    let weight_f: Vec<f64> = (0..grid.np)
        .map(|j| {
            let p = map.p_center(j);
            (1.0 - p * p).max(0.0).sqrt().max(EPS_F).sqrt()
        })
        .collect();
    let cutoff = 40.0 * sigma * sigma;
    let columns: Vec<Vec<f64>> = (0..grid.ns)
        .into_par_iter()
        .map(|i| {
            let xc = (i as f64 + 0.5) / grid.ns as f64 * perimeter;
            let mut h0 = vec![C64::new(0.0, 0.0); grid.np];
            let mut h1 = vec![C64::new(0.0, 0.0); grid.np];
            for q in 0..nodes {
                for w in -IMAGES..=IMAGES {
                    let d = x[q] - xc + w as f64 * perimeter;
                    if d * d > cutoff {
                        continue;
                    }
                    let env = (-d * d / (2.0 * sigma * sigma)).exp() * b.ds[q];
                    let mut z = C64::from_polar(env, -nk * p0 * d);
                    let rot = C64::from_polar(1.0, -nk * dp * d);
                    let (a0, a1) = (b.psi[q], h1_data[q]);
                    for j in 0..grid.np {
                        h0[j] += a0 * z;
                        h1[j] += a1 * z;
                        z *= rot;
                    }
                }
            }
            (0..grid.np)
                .map(|j| {
                    let f = weight_f[j];
                    let v = if closed { h1[j] / f } else { h0[j] * f - C64::new(0.0, 1.0) * h1[j] / f };
                    v.norm_sqr()
                })
                .collect()
        })
        .collect();
    for (i, col) in columns.into_iter().enumerate() {
        map.weights[i * grid.np..(i + 1) * grid.np].copy_from_slice(&col);
    }
    map.normalize()?;
    Ok(map)
}

/// Keeps the leaky region `|p| < p_c` and renormalizes it to unit mass.
pub fn restrict_below_critical<T: Real>(h: &HusimiMap<T>, p_c: T) -> Result<HusimiMap<T>, HusimiError> {
    if !h.normalized {
        return Err(HusimiError::Domain("restriction needs a normalized map".into()));
    }
    if !(p_c > T::zero() && p_c <= T::one()) {
        return Err(HusimiError::Config(format!("critical momentum {:?} outside (0, 1]", p_c)));
    }
    match h.restriction {
        Restriction::BelowCritical(prev) if prev == p_c => return Ok(h.clone()),
        Restriction::BelowCritical(_) => {
            return Err(HusimiError::Domain("map already restricted at a different p_c".into()));
        }
        Restriction::None => {}
    }
    let mut out = h.clone();
    for i in 0..h.ns {
        for j in 0..h.np {
            if h.p_center(j).abs() >= p_c {
                out.weights[i * h.np + j] = T::zero();
            }
        }
    }
    if !(out.mass() > T::zero()) {
        return Err(HusimiError::EmptyChannel(p_c.to_f64().unwrap_or(f64::NAN)));
    }
    out.normalize()?;
    out.restriction = Restriction::BelowCritical(p_c);
    Ok(out)
}

/// Centre of the heaviest cell; ties go to the smallest `s`, then `p`.
pub fn husimi_peak<T: Real>(h: &HusimiMap<T>) -> Result<(T, T), HusimiError> {
    let mut best: Option<(usize, usize, T)> = None;
    for i in 0..h.ns {
        for j in 0..h.np {
            let w = h.get(i, j);
            if w > T::zero() && best.map_or(true, |(_, _, b)| w > b) {
                best = Some((i, j, w));
            }
        }
    }
    match best {
        Some((i, j, _)) => Ok((h.s_center(i), h.p_center(j))),
        None => Err(HusimiError::Domain("all-zero map has no peak".into())),
    }
}
