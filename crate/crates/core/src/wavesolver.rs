//! Closed-billiard eigenvalues and open dielectric resonances of the ellipse.
//!
//! The boundary integral equations are discretized by a Nyström scheme on
//! the equispaced (offset) parameter grid `t_j = 2π(j + ½)/N`. The
//! logarithmic singularity of the Hankel kernels is split off and integrated
//! with trigonometric product weights, so the self terms are the analytic
//! limits of the regular parts plus the curvature term of the double layer.
//!
//! With the fundamental solution `G = (i/4) H₀⁽¹⁾(k|x−y|)`, the TM
//! transmission problem reads, for boundary data `ψ` and `∂_ν ψ` (outward
//! normal),
//!
//! ```text
//! (½ + K_{nk}) ψ − S_{nk} ∂_νψ = 0     interior side
//! (½ − K_k)   ψ + S_k    ∂_νψ = 0     exterior side
//! ```
//!
//! and the Dirichlet billiard reduces to `S_{nk} ∂_νψ = 0`. Both symmetry
//! axes of the ellipse are used to fold the system onto the first quadrant.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{EllipseGeometry, GeometryError};
use crate::linalg::{norm2, smallest_singular, smallest_singular_subspace, CMatrix, Lu};
use crate::specfun::{self, cyl01, SpecFunError, C64, EULER_GAMMA};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{elements} boundary elements below the resolution guard of {required}")]
    Resolution { elements: usize, required: usize },
    #[error("no convergence after {iterations} iterations (last kR = {last_re}{last_im:+}i)")]
    NoConvergence { iterations: usize, last_re: f64, last_im: f64 },
    #[error("converged to parity {found} instead of {requested}")]
    ParityMismatch { requested: Parity, found: Parity },
    #[error("relative smallest singular value {residual:.3e} above tolerance at kR = {re}{im:+}i")]
    NotAResonance { residual: f64, re: f64, im: f64 },
    #[error("open-cavity root has Im kR = {0} >= 0")]
    NotDecaying(f64),
    #[error("{0}")]
    Domain(String),
}

/// Symmetry under reflection about one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Sign {
    Even,
    Odd,
}

impl Sign {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            Sign::Even => 1.0,
            Sign::Odd => -1.0,
        }
    }

    fn from_parity_of(m: u32) -> Self {
        if m % 2 == 0 {
            Sign::Even
        } else {
            Sign::Odd
        }
    }

    fn flip(self) -> Self {
        match self {
            Sign::Even => Sign::Odd,
            Sign::Odd => Sign::Even,
        }
    }
}

/// Reflection parities: `x` for `x → −x`, `y` for `y → −y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub struct Parity {
    pub x: Sign,
    pub y: Sign,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = |s: Sign| if s == Sign::Even { 'e' } else { 'o' };
        write!(f, "{}{}", c(self.x), c(self.y))
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let sign = |c: char| match c {
            'e' => Ok(Sign::Even),
            'o' => Ok(Sign::Odd),
            _ => Err(format!("bad parity '{s}', expected two of e/o")),
        };
        let cs: Vec<char> = s.chars().collect();
        if cs.len() != 2 {
            return Err(format!("bad parity '{s}', expected two of e/o"));
        }
        Ok(Parity { x: sign(cs[0])?, y: sign(cs[1])? })
    }
}

impl Parity {
    pub const ALL: [Parity; 4] = [
        Parity { x: Sign::Even, y: Sign::Even },
        Parity { x: Sign::Odd, y: Sign::Even },
        Parity { x: Sign::Even, y: Sign::Odd },
        Parity { x: Sign::Odd, y: Sign::Odd },
    ];

    /// Parity of the circle mode `cos(mθ)`.
    pub fn cosine(m: u32) -> Self {
        Parity { x: Sign::from_parity_of(m), y: Sign::Even }
    }

    /// Parity of the circle mode `sin(mθ)`; `m ≥ 1`.
    pub fn sine(m: u32) -> Self {
        Parity { x: Sign::from_parity_of(m).flip(), y: Sign::Odd }
    }
}

/// Azimuthal index `m`, radial index `l` (number of radial nodes plus one)
/// and reflection parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub struct ModeLabel {
    pub m: u32,
    pub l: u32,
    pub parity: Parity,
}

impl ModeLabel {
    /// Label of the `cos(mθ)` family, the default tracked doublet member.
    pub fn new(m: u32, l: u32) -> Self {
        Self { m, l, parity: Parity::cosine(m) }
    }

    pub fn with_parity(m: u32, l: u32, parity: Parity) -> Result<Self, SolverError> {
        if l == 0 {
            return Err(SolverError::Config("radial index starts at 1".into()));
        }
        if parity != Parity::cosine(m) && (m == 0 || parity != Parity::sine(m)) {
            return Err(SolverError::Config(format!("parity {parity} impossible for m = {m}")));
        }
        Ok(Self { m, l, parity })
    }
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(m={}, l={}, {})", self.m, self.l, self.parity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Closed,
    Open,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Closed => "closed",
            Kind::Open => "open",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Billiard: `ψ = 0`, unknown `∂_ν ψ`, interior wavenumber `n k`.
    Dirichlet,
    /// Dielectric cavity, `ψ` and `∂_ν ψ` continuous.
    DielectricTm,
    /// Dielectric cavity, `ψ` and `∂_ν ψ / n²` continuous.
    DielectricTe,
}

/// Field component along the cavity axis: `E_z` (TM) or `H_z` (TE).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    #[serde(alias = "TM")]
    Tm,
    #[default]
    #[serde(alias = "TE")]
    Te,
}

impl Polarization {
    /// `∂_νψ_out / ∂_νψ_in` across the interface.
    pub fn derivative_jump(self, n: f64) -> f64 {
        match self {
            Polarization::Tm => 1.0,
            Polarization::Te => 1.0 / (n * n),
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::Tm => "TM",
            Polarization::Te => "TE",
        })
    }
}

impl Resonance {
    pub fn e(&self) -> f64 {
        self.geometry.e
    }
}

impl BoundaryCondition {
    pub fn kind(self) -> Kind {
        match self {
            BoundaryCondition::Dirichlet => Kind::Closed,
            BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => Kind::Open,
        }
    }

    pub fn dielectric(pol: Polarization) -> Self {
        match pol {
            Polarization::Tm => BoundaryCondition::DielectricTm,
            Polarization::Te => BoundaryCondition::DielectricTe,
        }
    }

    pub fn is_dielectric(self) -> bool {
        self.kind() == Kind::Open
    }

    pub fn polarization(self) -> Option<Polarization> {
        match self {
            BoundaryCondition::Dirichlet => None,
            BoundaryCondition::DielectricTm => Some(Polarization::Tm),
            BoundaryCondition::DielectricTe => Some(Polarization::Te),
        }
    }
}

/// Solver settings. `elements` is the number of Nyström nodes on the whole
/// boundary; `None` picks the count from [`CavityConfig::auto_elements`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    pub n: f64,
    pub elements: Option<usize>,
    pub root_tol: f64,
    /// Nodes per interior wavelength along the longest stretch of the
    /// parametrization when `elements` is automatic.
    pub points_per_wavelength: f64,
    pub min_elements: usize,
    /// Fold the system onto one quadrant using the label parity.
    pub reduce_parity: bool,
    /// Polarization of open resonances.
    pub polarization: Polarization,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            n: 3.3,
            elements: None,
            root_tol: 1e-8,
            points_per_wavelength: 6.0,
            min_elements: 64,
            reduce_parity: true,
            polarization: Polarization::Te,
        }
    }
}

impl CavityConfig {
    pub fn with_n(n: f64) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(SolverError::Config(format!("refractive index {} must be ≥ 1", self.n)));
        }
        if !(self.root_tol > 0.0) {
            return Err(SolverError::Config("root tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Minimum node count: 8 nodes per interior wavelength along the perimeter.
    pub fn nyquist_guard(&self, g: &EllipseGeometry<f64>, k: C64) -> usize {
        (self.n * k.re.abs() * g.perimeter / g.r * 8.0 / TAU).ceil() as usize
    }

    /// Node count for wavenumber `k` on `g`, rounded up to a multiple of 8.
    pub fn auto_elements(&self, g: &EllipseGeometry<f64>, k: C64) -> usize {
        if let Some(n) = self.elements {
            return n;
        }
        // Equispaced t-nodes are sparsest where the speed peaks at a.
        let waves = self.n * k.norm() * g.a;
        let want = (waves * self.points_per_wavelength).max(self.nyquist_guard(g, k) as f64);
        let n = (want.ceil() as usize).max(self.min_elements);
        n.div_ceil(8) * 8
    }
}

/// Boundary data sampled on the Nyström nodes of the full boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    /// Arclength quadrature weight of each node.
    pub ds: Vec<f64>,
    pub psi: Vec<C64>,
    pub dpsi: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resonance {
    pub k: C64,
    pub label: ModeLabel,
    pub geometry: EllipseGeometry<f64>,
    pub n: f64,
    pub kind: Kind,
    /// `None` for closed billiard modes.
    pub polarization: Option<Polarization>,
    pub boundary: BoundaryData,
    /// Smallest singular value relative to the Frobenius norm at convergence.
    pub residual: f64,
    pub elements: usize,
}

// ---------------------------------------------------------------------------
// circle oracles

/// Dirichlet circle eigenvalue `j_{m,l}` (empty billiard).
pub fn circle_billiard_k(m: u32, l: u32) -> Result<f64, SolverError> {
    Ok(specfun::bessel_zero(m, l)?)
}

/// Dirichlet circle eigenvalue for a billiard filled with index `n`.
pub fn circle_closed_k(m: u32, l: u32, n: f64) -> Result<f64, SolverError> {
    Ok(circle_billiard_k(m, l)? / n)
}

/// Matching function `ρ J_m'(nx) H_m(x) − J_m(nx) H_m'(x)` and its
/// derivative in `x`, with `ρ = n` (TM) or `1/n` (TE).
pub fn circle_matching(m: u32, n: f64, pol: Polarization, x: C64) -> Result<(C64, C64), SolverError> {
    let y = x * n;
    let js = specfun::bessel_j_seq(m + 1, y)?;
    let hs = specfun::hankel1_seq(m + 1, x)?;
    let mu = m as usize;
    let j = js[mu];
    let jp = specfun::derivative_from_seq(&js, mu);
    let h = hs[mu];
    let hp = specfun::derivative_from_seq(&hs, mu);
    let mm = (m * m) as f64;
    let jpp = -jp / y - (1.0 - mm / (y * y)) * j;
    let hpp = -hp / x - (1.0 - mm / (x * x)) * h;
    let rho = n * pol.derivative_jump(n);
    let f = rho * jp * h - j * hp;
    let df = rho * n * jpp * h + (rho - n) * jp * hp - j * hpp;
    Ok((f, df))
}

/// Number of interior radial nodes plus one for a circle mode of index `m`
/// whose interior wavenumber is `n Re kR`.
pub fn radial_index(m: u32, n_re_k: f64) -> Result<u32, SolverError> {
    let mut l = 1;
    while l <= 20 && specfun::bessel_zero(m, l)? < n_re_k {
        l += 1;
    }
    Ok(l)
}

/// TM open circle resonance of label `(m, l)`.
pub fn circle_cavity_k(m: u32, l: u32, n: f64) -> Result<C64, SolverError> {
    circle_resonance(m, l, n, Polarization::Tm)
}

/// Open circle resonance of label `(m, l)`: Newton on the matching function
/// seeded inside `(j_{m−1,l}, j_{m,l}]/n`.
pub fn circle_resonance(m: u32, l: u32, n: f64, pol: Polarization) -> Result<C64, SolverError> {
    if !(n > 1.0) {
        return Err(SolverError::Config(format!("refractive index {n} must exceed 1")));
    }
    let upper = specfun::bessel_zero(m, l)? / n;
    let lower = if m == 0 {
        if l == 1 { 0.5 * upper } else { specfun::bessel_zero(1, l - 1)? / n }
    } else {
        specfun::bessel_zero(m - 1, l)? / n
    };
    let width = upper - lower;
    let mut seeds = vec![C64::new(upper, -1e-3)];
    for f in [0.5, 0.25, 0.75, 0.9, 0.1] {
        seeds.push(C64::new(lower + f * width, -0.05));
    }
    // High index: the bracket shrinks like 1/n and the width like x^{2m}.
    for f in [0.01, 0.1, 0.3] {
        seeds.push(C64::new(lower + f * width, -1e-3 * width));
    }
    let mut last = C64::new(upper, 0.0);
    for seed in seeds {
        match newton_matching(m, n, pol, seed) {
            Ok(k) => {
                last = k;
                if k.im < 0.0 && radial_index(m, n * k.re)? == l {
                    return Ok(k);
                }
            }
            Err(SolverError::NoConvergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SolverError::NoConvergence { iterations: 100, last_re: last.re, last_im: last.im })
}

fn newton_matching(m: u32, n: f64, pol: Polarization, seed: C64) -> Result<C64, SolverError> {
    let mut x = seed;
    for _ in 0..100 {
        // Newton on f / H_m(x), which removes the small-x growth of H_m.
        let (f, df) = circle_matching(m, n, pol, x)?;
        let h = specfun::hankel1(m, x)?;
        let hp = specfun::hankel1_prime(m, x)?;
        let step = f * h / (df * h - f * hp);
        let mut next = x - step;
        if next.re <= 0.0 {
            next = C64::new(0.5 * x.re, next.im);
        }
        if next.im < -5.0 {
            next.im = -5.0;
        }
        x = next;
        if step.norm() < 1e-14 * x.norm() {
            let (f, _) = circle_matching(m, n, pol, x)?;
            let scale = matching_scale(m, n, pol, x)?;
            if f.norm() < 1e-10 * scale {
                return Ok(x);
            }
        }
    }
    Err(SolverError::NoConvergence { iterations: 100, last_re: x.re, last_im: x.im })
}

/// Magnitude of the individual products in the matching function.
pub fn matching_scale(m: u32, n: f64, pol: Polarization, x: C64) -> Result<f64, SolverError> {
    let js = specfun::bessel_j_seq(m + 1, x * n)?;
    let hs = specfun::hankel1_seq(m + 1, x)?;
    let mu = m as usize;
    let a = n * pol.derivative_jump(n) * specfun::derivative_from_seq(&js, mu) * hs[mu];
    let b = js[mu] * specfun::derivative_from_seq(&hs, mu);
    Ok(a.norm().max(b.norm()))
}

// ---------------------------------------------------------------------------
// Nyström discretization

/// Node data of the equispaced parameter grid on one ellipse.
#[derive(Clone, Debug)]
pub struct BemGeometry {
    pub geometry: EllipseGeometry<f64>,
    pub nodes: usize,
    pub t: Vec<f64>,
    pub x: Vec<[f64; 2]>,
    pub vel: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    /// Self term of the double-layer kernel (curvature correction).
    pub dl_diag: Vec<f64>,
    /// Logarithmic product-quadrature weights by index difference.
    log_weight: Vec<f64>,
    /// `ln(4 sin²(Δt/2))` by index difference (entry 0 unused).
    log_sin: Vec<f64>,
}

impl BemGeometry {
    pub fn new(geometry: EllipseGeometry<f64>, nodes: usize) -> Result<Self, SolverError> {
        if nodes < 8 || nodes % 4 != 0 {
            return Err(SolverError::Config(format!("node count {nodes} must be a multiple of 4 and ≥ 8")));
        }
        let half = nodes / 2;
        let h = TAU / nodes as f64;
        let t: Vec<f64> = (0..nodes).map(|j| (j as f64 + 0.5) * h).collect();
        let mut x = Vec::with_capacity(nodes);
        let mut vel = Vec::with_capacity(nodes);
        let mut speed = Vec::with_capacity(nodes);
        let mut dl_diag = Vec::with_capacity(nodes);
        for &tj in &t {
            let p = geometry.position(tj);
            let v = geometry.velocity(tj);
            let acc = geometry.acceleration(tj);
            let sp = v.norm();
            x.push([p.x, p.y]);
            vel.push([v.x, v.y]);
            speed.push(sp);
            dl_diag.push((v.y * acc.x - v.x * acc.y) / (4.0 * PI * sp * sp));
        }
        let nh = half as f64;
        let log_weight = (0..nodes)
            .map(|d| {
                let dt = d as f64 * h;
                let mut s = 0.0;
                for m in 1..half {
                    s += (m as f64 * dt).cos() / m as f64;
                }
                -TAU / nh * s - PI / (nh * nh) * (nh * dt).cos()
            })
            .collect();
        let log_sin = (0..nodes)
            .map(|d| {
                if d == 0 {
                    0.0
                } else {
                    let sn = (0.5 * d as f64 * h).sin();
                    (4.0 * sn * sn).ln()
                }
            })
            .collect();
        Ok(Self { geometry, nodes, t, x, vel, speed, dl_diag, log_weight, log_sin })
    }

    /// Trapezoid weight in the parameter.
    #[inline]
    pub fn h(&self) -> f64 {
        TAU / self.nodes as f64
    }

    pub fn quadrant(&self) -> usize {
        self.nodes / 4
    }

    /// Quadrant representative and sign of node `j` under `parity`.
    #[inline]
    pub fn fold(&self, j: usize, parity: Parity) -> (usize, f64) {
        let q = self.quadrant();
        let nn = self.nodes;
        match j / q {
            0 => (j, 1.0),
            1 => (nn / 2 - 1 - j, parity.x.factor()),
            2 => (j - nn / 2, parity.x.factor() * parity.y.factor()),
            _ => (nn - 1 - j, parity.y.factor()),
        }
    }

    /// Arclength weights of the trapezoid rule.
    pub fn ds(&self) -> Vec<f64> {
        let h = self.h();
        self.speed.iter().map(|s| s * h).collect()
    }
}

/// Single- and double-layer entries for one node pair at wavenumber `k`.
#[inline]
fn layer_entries(bg: &BemGeometry, i: usize, j: usize, k: C64) -> (C64, C64) {
    let h = bg.h();
    let nodes = bg.nodes;
    let d = if i >= j { i - j } else { i + nodes - j };
    let rw = bg.log_weight[d];
    let sp = bg.speed[j];
    if i == j {
        let m1 = -sp / (4.0 * PI);
        let m2 = (I * 0.25 - EULER_GAMMA / TAU - (k * sp * 0.5).ln() / TAU) * sp;
        return (rw * m1 + h * m2, C64::new(h * bg.dl_diag[i], 0.0));
    }
    let [xi, yi] = bg.x[i];
    let [xj, yj] = bg.x[j];
    let (dx, dy) = (xi - xj, yi - yj);
    let r = dx.hypot(dy);
    let [vx, vy] = bg.vel[j];
    let qn = (dx * vy - dy * vx) / r;
    let c = cyl01(k * r);
    let ls = bg.log_sin[d];
    let m1 = -c.j0 * (sp / (4.0 * PI));
    let m = I * 0.25 * c.h0() * sp;
    let m2 = m - m1 * ls;
    let l1 = -(k / (4.0 * PI)) * c.j1 * qn;
    let l = I * k * 0.25 * c.h1() * qn;
    let l2 = l - l1 * ls;
    (rw * m1 + h * m2, rw * l1 + h * l2)
}

/// Discretized layer operators restricted to rows `rows` and folded columns.
struct Layers {
    s: CMatrix,
    k: CMatrix,
}

fn layers(bg: &BemGeometry, k: C64, parity: Option<Parity>) -> Layers {
    let nodes = bg.nodes;
    let (rows, cols) = match parity {
        Some(_) => (bg.quadrant(), bg.quadrant()),
        None => (nodes, nodes),
    };
    let mut s = CMatrix::zeros(rows, cols);
    let mut kk = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..nodes {
            let (sv, kv) = layer_entries(bg, i, j, k);
            let (col, sign) = match parity {
                Some(p) => bg.fold(j, p),
                None => (j, 1.0),
            };
            s.add(i, col, sv * sign);
            kk.add(i, col, kv * sign);
        }
    }
    Layers { s, k: kk }
}

/// System matrix at wavenumber `k`. With `parity` the columns are folded
/// onto the first quadrant; otherwise the full boundary is used.
pub fn assemble_system(bg: &BemGeometry, k: C64, n: f64, bc: BoundaryCondition, parity: Option<Parity>) -> CMatrix {
    match bc {
        BoundaryCondition::Dirichlet => layers(bg, k * n, parity).s,
        BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => {
            let jump = bc.polarization().map_or(1.0, |p| p.derivative_jump(n));
            let inner = layers(bg, k * n, parity);
            let outer = layers(bg, k, parity);
            let m = inner.s.rows;
            // Unknowns are (ψ, ∂_νψ/(nk)); the rescaling balances the blocks.
            let nk = k * n;
            let mut a = CMatrix::zeros(2 * m, 2 * m);
            for i in 0..m {
                for j in 0..m {
                    let id = if i == j { 0.5 } else { 0.0 };
                    a.set(i, j, inner.k.get(i, j) + id);
                    a.set(i, m + j, -inner.s.get(i, j) * nk);
                    a.set(m + i, j, -outer.k.get(i, j) + id);
                    a.set(m + i, m + j, outer.s.get(i, j) * nk * jump);
                }
            }
            a
        }
    }
}

/// Full-boundary system matrix with the resolution guard applied.
pub fn assemble_bem(
    g: &EllipseGeometry<f64>,
    k: C64,
    cfg: &CavityConfig,
    bc: BoundaryCondition,
) -> Result<CMatrix, SolverError> {
    cfg.validate()?;
    let nodes = cfg.auto_elements(g, k);
    let required = cfg.nyquist_guard(g, k);
    if nodes < required {
        return Err(SolverError::Resolution { elements: nodes, required });
    }
    let bg = BemGeometry::new(*g, nodes)?;
    Ok(assemble_system(&bg, k, cfg.n, bc, None))
}

/// Relative smallest singular value `σ_min/‖A‖_F` and its right singular vector.
pub fn smallest_singular_value(a: &CMatrix) -> (f64, Vec<C64>) {
    let lu = Lu::new(a);
    let start = probe_vector(a.cols, 0.37);
    let (s, v) = smallest_singular(a, &lu, &start, 3);
    (s / a.frobenius(), v)
}

fn probe_vector(len: usize, phase: f64) -> Vec<C64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..len)
        .map(|j| {
            let a = TAU * ((j as f64 + phase) * GOLDEN).fract();
            C64::new(1.0 + 0.3 * a.sin(), 0.0) * C64::from_polar(1.0, a)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// root search

/// Scalar reduction `1/det(Vᴴ A(k)⁻¹ U)` with `V` spanning the right singular
/// subspace of the smallest singular values at an anchor point and `U = A V`
/// there. Near a root the matrix has a simple pole, so the reduction is
/// analytic with a simple zero at the resonance. Using a two-dimensional
/// subspace keeps a nearby small but non-vanishing singular value from
/// flattening the landscape around the root.
struct Probe<'a> {
    bg: &'a BemGeometry,
    n: f64,
    bc: BoundaryCondition,
    parity: Option<Parity>,
    v: Vec<Vec<C64>>,
    u: Vec<Vec<C64>>,
    // Last assembled system, reused when the same point is requested again.
    cache: Option<(C64, CMatrix, Lu)>,
}

/// Dimension of the probe subspace.
const PROBE_RANK: usize = 2;

impl<'a> Probe<'a> {
    fn new(bg: &'a BemGeometry, n: f64, bc: BoundaryCondition, parity: Option<Parity>, anchor: C64) -> Self {
        let mut p = Self { bg, n, bc, parity, v: Vec::new(), u: Vec::new(), cache: None };
        p.reanchor(anchor);
        p
    }

    fn system(&mut self, k: C64) -> &(C64, CMatrix, Lu) {
        if !matches!(&self.cache, Some((at, _, _)) if *at == k) {
            let a = assemble_system(self.bg, k, self.n, self.bc, self.parity);
            let lu = Lu::new(&a);
            self.cache = Some((k, a, lu));
        }
        self.cache.as_ref().unwrap()
    }

    fn reanchor(&mut self, k: C64) {
        let (_, a, lu) = self.system(k);
        let starts: Vec<Vec<C64>> = (0..PROBE_RANK).map(|i| probe_vector(a.cols, 0.11 + 0.42 * i as f64)).collect();
        let v = smallest_singular_subspace(lu, &starts, 3);
        let u: Vec<Vec<C64>> = v.iter().map(|x| a.mul_vec(x)).collect();
        let finite = v.iter().chain(&u).flatten().all(|z| z.re.is_finite() && z.im.is_finite());
        if finite {
            self.v = v;
            self.u = u;
        } else {
            self.v = starts.clone();
            self.u = starts;
        }
    }

    fn eval(&mut self, k: C64) -> C64 {
        self.system(k);
        let (_, _, lu) = self.cache.as_ref().unwrap();
        if lu.is_singular() {
            return C64::new(0.0, 0.0);
        }
        let x: Vec<Vec<C64>> = self.u.iter().map(|u| lu.solve(u)).collect();
        let w = |i: usize, j: usize| -> C64 { self.v[i].iter().zip(&x[j]).map(|(v, x)| v.conj() * x).sum() };
        let det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
        1.0 / det
    }

    /// Relative smallest singular value and right singular vector at `k`.
    fn certificate(&mut self, k: C64) -> (f64, Vec<C64>) {
        let (_, a, lu) = self.system(k);
        let start = probe_vector(a.cols, 0.37);
        let (s, v) = smallest_singular(a, lu, &start, 3);
        (s / a.frobenius(), v)
    }
}

/// Muller iteration on the scalar reduction. Returns the converged root.
fn muller(probe: &mut Probe<'_>, seed: C64, scale: f64, tol: f64, max_iter: usize) -> Result<C64, SolverError> {
    let h = scale;
    let mut x0 = seed - h;
    let mut x1 = seed + C64::new(0.0, -0.5 * h);
    let mut x2 = seed;
    let mut f2 = probe.eval(x2);
    let mut f0 = probe.eval(x0);
    let mut f1 = probe.eval(x1);
    for it in 0..max_iter {
        if f2.norm() == 0.0 {
            return Ok(x2);
        }
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * f2 * a).sqrt();
        let den = if (b + disc).norm() >= (b - disc).norm() { b + disc } else { b - disc };
        let mut step = if den.norm() == 0.0 { C64::new(h, 0.0) } else { -2.0 * f2 / den };
        // Keep steps inside a trust region around the seed scale.
        let cap = 4.0 * scale;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let x3 = x2 + step;
        if !x3.re.is_finite() || !x3.im.is_finite() {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = probe.eval(x2);
        if step.norm() <= tol * x2.norm().max(1.0) {
            return Ok(x2);
        }
        if it + 1 == max_iter {
            break;
        }
    }
    Err(SolverError::NoConvergence { iterations: max_iter, last_re: x2.re, last_im: x2.im })
}

/// Options for a single resonance search.
#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Initial Muller spread in kR units.
    pub spread: f64,
    pub max_iter: usize,
    /// Relative step size at which Muller stops.
    pub step_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { spread: 1e-3, max_iter: 40, step_tol: 1e-12 }
    }
}

/// Locates the resonance nearest to `seed` in the symmetry class `label.parity`.
pub fn resonance_search(
    g: &EllipseGeometry<f64>,
    cfg: &CavityConfig,
    bc: BoundaryCondition,
    seed: C64,
    label: ModeLabel,
) -> Result<Resonance, SolverError> {
    resonance_search_with(g, cfg, bc, seed, label, SearchOptions::default())
}

pub fn resonance_search_with(
    g: &EllipseGeometry<f64>,
    cfg: &CavityConfig,
    bc: BoundaryCondition,
    seed: C64,
    label: ModeLabel,
    opts: SearchOptions,
) -> Result<Resonance, SolverError> {
    cfg.validate()?;
    if bc.is_dielectric() && !(cfg.n > 1.0) {
        return Err(SolverError::Config("dielectric cavity needs n > 1".into()));
    }
    let nodes = cfg.auto_elements(g, seed);
    let required = cfg.nyquist_guard(g, seed);
    if nodes < required {
        return Err(SolverError::Resolution { elements: nodes, required });
    }
    let bg = BemGeometry::new(*g, nodes)?;
    let parity = cfg.reduce_parity.then_some(label.parity);
    let seed = match bc {
        BoundaryCondition::Dirichlet => C64::new(seed.re, 0.0),
        BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => seed,
    };
    let mut probe = Probe::new(&bg, cfg.n, bc, parity, seed);
    let scale = opts.spread.max(1e-8) * seed.norm().max(1.0);
    let mut k = match muller(&mut probe, seed, scale, opts.step_tol, opts.max_iter) {
        Ok(k) => k,
        Err(_) => {
            // One restart with the singular pair refreshed along the way.
            let mid = muller(&mut probe, seed, scale, 1e-4, 6).unwrap_or(seed);
            probe.reanchor(mid);
            muller(&mut probe, mid, 0.25 * scale, opts.step_tol, opts.max_iter)?
        }
    };
    if bc == BoundaryCondition::Dirichlet {
        if k.im.abs() > 1e-8 * k.norm().max(1.0) {
            return Err(SolverError::Domain(format!("closed-billiard root left the real axis: Im kR = {:e}", k.im)));
        }
        k = C64::new(k.re, 0.0);
    }
    let (residual, v) = probe.certificate(k);
    if !(residual <= cfg.root_tol) {
        return Err(SolverError::NotAResonance { residual, re: k.re, im: k.im });
    }
    if bc.is_dielectric() && !(k.im < 0.0) {
        return Err(SolverError::NotDecaying(k.im));
    }
    let boundary = expand_boundary(&bg, &v, k * cfg.n, bc, parity);
    if parity.is_none() {
        let found = detect_parity(&bg, &boundary, bc);
        if found != label.parity {
            return Err(SolverError::ParityMismatch { requested: label.parity, found });
        }
    }
    Ok(Resonance {
        k,
        label,
        geometry: *g,
        n: cfg.n,
        kind: bc.kind(),
        polarization: bc.polarization(),
        boundary,
        residual,
        elements: nodes,
    })
}

/// Unfolds a (possibly quadrant-reduced) null vector onto all nodes and
/// normalizes it: `max|ψ| = 1` (open) or `max|∂_νψ| = 1` (closed), with the
/// largest entry made real and positive.
fn expand_boundary(bg: &BemGeometry, v: &[C64], nk: C64, bc: BoundaryCondition, parity: Option<Parity>) -> BoundaryData {
    let nodes = bg.nodes;
    let dim = match parity {
        Some(_) => bg.quadrant(),
        None => nodes,
    };
    let unfold = |block: &[C64]| -> Vec<C64> {
        (0..nodes)
            .map(|j| match parity {
                Some(p) => {
                    let (q, sign) = bg.fold(j, p);
                    block[q] * sign
                }
                None => block[j],
            })
            .collect()
    };
    let (mut psi, mut dpsi) = match bc {
        BoundaryCondition::Dirichlet => (vec![C64::new(0.0, 0.0); nodes], unfold(&v[..dim])),
        BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => (unfold(&v[..dim]), unfold(&v[dim..2 * dim]).into_iter().map(|z| z * nk).collect()),
    };
    let reference = match bc {
        BoundaryCondition::Dirichlet => &dpsi,
        BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => &psi,
    };
    let (imax, _) = reference
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
    let pivot = reference[imax];
    let scale = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm_sqr() } else { C64::new(1.0, 0.0) };
    for z in psi.iter_mut().chain(dpsi.iter_mut()) {
        *z *= scale;
    }
    let g = &bg.geometry;
    BoundaryData {
        t: bg.t.clone(),
        s: bg.t.iter().map(|&t| g.s_of_t(t)).collect(),
        ds: bg.ds(),
        psi,
        dpsi,
    }
}

/// Reflection class with the largest projection of the boundary data.
pub fn detect_parity(bg: &BemGeometry, data: &BoundaryData, bc: BoundaryCondition) -> Parity {
    let fields: Vec<&Vec<C64>> = match bc {
        BoundaryCondition::Dirichlet => vec![&data.dpsi],
        BoundaryCondition::DielectricTm | BoundaryCondition::DielectricTe => vec![&data.psi, &data.dpsi],
    };
    let mut best = (Parity::ALL[0], -1.0);
    for p in Parity::ALL {
        let mut weight = 0.0;
        for f in &fields {
            // Projection onto the class: average over the four images.
            for q in 0..bg.quadrant() {
                let mut acc = C64::new(0.0, 0.0);
                for j in [q, bg.nodes / 2 - 1 - q, bg.nodes / 2 + q, bg.nodes - 1 - q] {
                    let (_, sign) = bg.fold(j, p);
                    acc += f[j] * sign;
                }
                weight += acc.norm_sqr();
            }
        }
        if weight > best.1 {
            best = (p, weight);
        }
    }
    best.0
}

/// `Q = E/(2γ)` with `E = Re kR`, `γ = −2 Im kR`.
pub fn quality_factor(r: &Resonance) -> Result<f64, SolverError> {
    if r.kind == Kind::Closed {
        return Err(SolverError::Domain("closed resonances have infinite Q".into()));
    }
    quality_factor_of(r.k)
}

pub fn quality_factor_of(k: C64) -> Result<f64, SolverError> {
    let gamma = -2.0 * k.im;
    if !(gamma > 0.0) {
        return Err(SolverError::Domain(format!("decay width {gamma} must be positive")));
    }
    Ok(k.re / (2.0 * gamma))
}

// ---------------------------------------------------------------------------
// field evaluation

/// Rectangular sampling grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl FieldGrid {
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        let fx = if self.nx > 1 { ix as f64 / (self.nx - 1) as f64 } else { 0.5 };
        let fy = if self.ny > 1 { iy as f64 / (self.ny - 1) as f64 } else { 0.5 };
        (self.x_min + fx * (self.x_max - self.x_min), self.y_min + fy * (self.y_max - self.y_min))
    }
}

#[derive(Clone, Debug)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub value: C64,
    pub inside: bool,
    /// Closer to the boundary than one node spacing; accuracy reduced.
    pub near_boundary: bool,
}

/// Field at a single point from the boundary-integral representation.
pub fn field_at(r: &Resonance, x: f64, y: f64) -> Result<FieldSample, SolverError> {
    let g = r.geometry;
    let inside = (x / g.a).powi(2) + (y / g.b).powi(2) < 1.0;
    let k = if inside { r.k * r.n } else { r.k };
    // `dpsi` holds the interior-side derivative.
    let jump = if inside { 1.0 } else { r.polarization.map_or(1.0, |p| p.derivative_jump(r.n)) };
    let bd = &r.boundary;
    let nodes = bd.t.len();
    let spacing = bd.ds.iter().cloned().fold(0.0, f64::max);
    let mut dmin = f64::INFINITY;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..nodes {
        let p = g.position(bd.t[j]);
        let v = g.velocity(bd.t[j]);
        let (dx, dy) = (x - p.x, y - p.y);
        let rr = dx.hypot(dy);
        dmin = dmin.min(rr);
        if rr == 0.0 {
            continue;
        }
        let c = cyl01(k * rr);
        let w = TAU / nodes as f64;
        let sl = I * 0.25 * c.h0() * v.norm();
        let dl = I * k * 0.25 * c.h1() * (dx * v.y - dy * v.x) / rr;
        let contrib = if inside { sl * bd.dpsi[j] - dl * bd.psi[j] } else { dl * bd.psi[j] - sl * bd.dpsi[j] * jump };
        acc += contrib * w;
    }
    Ok(FieldSample { x, y, value: acc, inside, near_boundary: dmin < spacing })
}

/// Samples the field of an open resonance on `grid` (row-major in `y`, then `x`).
pub fn field_map(r: &Resonance, grid: &FieldGrid) -> Result<Vec<FieldSample>, SolverError> {
    if r.kind != Kind::Open {
        return Err(SolverError::Domain("field maps need an open resonance".into()));
    }
    let mut out = Vec::with_capacity(grid.nx * grid.ny);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = grid.point(ix, iy);
            out.push(field_at(r, x, y)?);
        }
    }
    Ok(out)
}

/// L2 norm of a boundary vector.
pub fn boundary_norm(v: &[C64]) -> f64 {
    norm2(v)
}
