//! Nyström solver for plane-wave scattering by sound-soft (TM) and sound-hard
//! (TE) open arcs.
//!
//! Each arc is pulled back to τ ∈ [0, 2π) through t = cos τ, which absorbs
//! the square-root endpoint behaviour of the densities. The logarithmic part
//! of the Helmholtz kernel is integrated with Kress' product rule and the
//! remainder with the trapezoid rule. The hypersingular TE operator is handled
//! in Maue's form with trigonometric differentiation.
//!
//! Densities are stored on the full periodic grid of 2n points per arc:
//! for TM the even function ψ(σ) = φ(z(cos σ))·|z′(cos σ)|·|sin σ|, for TE the
//! odd function g(σ) equal to the double-layer density at z(cos σ) on (0, π).

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Crack, ParametricArc};
use crate::specfun::{bessel_j, bessel_jy01, hankel1, EULER_GAMMA};
use crate::{Vec2, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// TM polarization, u = 0 on the crack.
    Dirichlet,
    /// TE polarization, ∂u/∂ν = 0 on the crack.
    Neumann,
}

impl BoundaryCondition {
    pub fn label(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub direction: Vec2,
    pub k: f64,
}

impl PlaneWave {
    pub fn new(direction: Vec2, k: f64) -> Result<Self> {
        check_unit(direction)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("wavenumber must be positive, got {k}")));
        }
        Ok(PlaneWave { direction, k })
    }

    pub fn from_angle(angle: f64, k: f64) -> Result<Self> {
        Self::new(Vec2::new(angle.cos(), angle.sin()), k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NystromConfig {
    /// Quadrature intervals on [0, π]: n + 1 distinct nodes per arc.
    pub nodes_per_arc: usize,
    /// Largest accepted relative residual ‖Ax − b‖/‖b‖ of the linear solve.
    pub rhs_tolerance: f64,
}

impl Default for NystromConfig {
    fn default() -> Self {
        NystromConfig { nodes_per_arc: 128, rhs_tolerance: 1e-8 }
    }
}

impl NystromConfig {
    pub fn with_nodes(nodes_per_arc: usize) -> Self {
        NystromConfig { nodes_per_arc, ..Default::default() }
    }

    /// Node count for quick internal checks.
    pub fn fast() -> Self {
        Self::with_nodes(64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_arc < 16 || self.nodes_per_arc % 2 != 0 {
            return Err(Error::config(format!(
                "nodes_per_arc must be even and >= 16, got {}",
                self.nodes_per_arc
            )));
        }
        if !(self.rhs_tolerance > 0.0) {
            return Err(Error::config("rhs_tolerance must be positive"));
        }
        Ok(())
    }
}

fn check_unit(v: Vec2) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("direction ({}, {}) is not a unit vector", v.x, v.y)));
    }
    Ok(())
}

/// Pulled-back grid of one arc.
#[derive(Clone, Debug)]
pub struct ArcNodes {
    pub arc: ParametricArc,
    /// Half the periodic node count.
    pub n: usize,
    pub tau: Vec<f64>,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    /// |z′(cos τ)|.
    pub speed: Vec<f64>,
}

impl ArcNodes {
    fn new(arc: &ParametricArc, n: usize) -> Self {
        let tau: Vec<f64> = (0..2 * n).map(|j| j as f64 * PI / n as f64).collect();
        let t: Vec<f64> = tau.iter().map(|s| s.cos()).collect();
        ArcNodes {
            arc: arc.clone(),
            n,
            points: t.iter().map(|&t| arc.position(t)).collect(),
            normals: t.iter().map(|&t| arc.normal(t)).collect(),
            speed: t.iter().map(|&t| arc.derivative(t).norm()).collect(),
            tau,
        }
    }

    fn len(&self) -> usize {
        2 * self.n
    }

    /// Signed arc-length factor |z′(cos τ)|·sin τ.
    fn jac(&self, j: usize) -> f64 {
        self.speed[j] * self.tau[j].sin()
    }

    /// Internal parameters t = cos τ of the distinct nodes j = 0..=n.
    pub fn params(&self) -> Vec<f64> {
        self.tau[..=self.n].iter().map(|s| s.cos()).collect()
    }
}

/// Fundamental solution Φ(x, y) = (i/4)·H₀⁽¹⁾(k|x − y|).
pub fn green(k: f64, x: Vec2, y: Vec2) -> Result<C64> {
    Ok(C64::new(0.0, 0.25) * hankel1(0, k * (x - y).norm())?)
}

/// Kress weights R_d for offsets τ − σ_j = dπ/n.
fn kress_weights(n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let mut s = 0.0;
    for m in 1..n {
        s += (m as f64 * delta).cos() / m as f64;
    }
    -2.0 * PI / nf * s - PI / (nf * nf) * (nf * delta).cos()
}

/// Weights W with ∫₀^{2π} Φ(x(τ_i), y(σ)) f(σ) dσ ≈ Σ_j W_ij f_j for even f.
fn kernel_block(k: f64, a: &ArcNodes, b: &ArcNodes, same: bool) -> Result<DMatrix<C64>> {
    let (na, nb) = (a.len(), b.len());
    let h = PI / b.n as f64;
    let rows: Result<Vec<Vec<C64>>> = (0..na)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(nb);
            for j in 0..nb {
                if !same {
                    row.push(h * green(k, a.points[i], b.points[j])?);
                    continue;
                }
                let n = a.n;
                let (ti, sj) = (a.tau[i], b.tau[j]);
                let rw = kress_weights(n, ti - sj) - h * LN_2;
                let w = if j == i || j == (2 * n - i) % (2 * n) {
                    let k2 = C64::new(0.0, 0.25)
                        - (0.5 * k).ln() / (2.0 * PI)
                        - (EULER_GAMMA + a.speed[i].ln()) / (2.0 * PI);
                    -rw / (2.0 * PI) + h * k2
                } else {
                    let r = (a.points[i] - b.points[j]).norm();
                    let (j0, _, y0, _) = bessel_jy01(k * r)?;
                    let phi = C64::new(-0.25 * y0, 0.25 * j0);
                    let k1 = -j0 / (2.0 * PI);
                    let dc = (-2.0 * (0.5 * (ti + sj)).sin() * (0.5 * (ti - sj)).sin()).abs();
                    let k2 = phi - k1 * dc.ln();
                    k1 * rw + h * k2
                };
                row.push(w);
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;
    Ok(DMatrix::from_fn(na, nb, |i, j| rows[i][j]))
}

/// Trigonometric differentiation matrix on 2n equispaced points.
fn diff_matrix(n: usize) -> DMatrix<C64> {
    let m = 2 * n;
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            C64::new(0.0, 0.0)
        } else {
            let d = (i as f64 - j as f64) * PI / n as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(0.5 * sign / (0.5 * d).tan(), 0.0)
        }
    })
}

/// Factored Nyström system for one crack, wavenumber and boundary condition.
pub struct Solver {
    pub k: f64,
    pub bc: BoundaryCondition,
    pub cfg: NystromConfig,
    arcs: Arc<Vec<ArcNodes>>,
    offsets: Vec<usize>,
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<C64>,
}

/// Density on all arcs for one incident wave.
#[derive(Clone, Debug)]
pub struct DensitySolution {
    pub bc: BoundaryCondition,
    pub wave: PlaneWave,
    pub arcs: Arc<Vec<ArcNodes>>,
    /// Full periodic grid values per arc.
    pub values: Vec<Vec<C64>>,
}

impl Solver {
    pub fn new(crack: &Crack, k: f64, bc: BoundaryCondition, cfg: &NystromConfig) -> Result<Self> {
        cfg.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("wavenumber must be positive, got {k}")));
        }
        // n + 1 distinct nodes on the arc, 2n on the periodic τ grid.
        let n = cfg.nodes_per_arc;
        let arcs: Vec<ArcNodes> = crack.components.iter().map(|a| ArcNodes::new(a, n)).collect();
        let unknowns = |a: &ArcNodes| match bc {
            BoundaryCondition::Dirichlet => a.n + 1,
            BoundaryCondition::Neumann => a.n - 1,
        };
        let mut offsets = vec![0];
        for a in &arcs {
            offsets.push(offsets.last().unwrap() + unknowns(a));
        }
        let dim = *offsets.last().unwrap();
        let mut matrix = DMatrix::zeros(dim, dim);
        for (ia, a) in arcs.iter().enumerate() {
            for (ib, b) in arcs.iter().enumerate() {
                let w = kernel_block(k, a, b, ia == ib)?;
                let block = match bc {
                    BoundaryCondition::Dirichlet => fold_dirichlet(&w, a, b),
                    BoundaryCondition::Neumann => fold_neumann(&w, k, a, b),
                };
                matrix
                    .view_mut((offsets[ia], offsets[ib]), (block.nrows(), block.ncols()))
                    .copy_from(&block);
            }
        }
        let lu = matrix.clone().lu();
        let diag = lu.u().diagonal();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in diag.iter() {
            lo = lo.min(d.norm());
            hi = hi.max(d.norm());
        }
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !cond.is_finite() || cond > 1e14 {
            return Err(Error::Solver {
                cond,
                context: format!("Nyström matrix at k = {k} is numerically singular"),
            });
        }
        Ok(Solver { k, bc, cfg: *cfg, arcs: Arc::new(arcs), offsets, lu, matrix })
    }

    pub fn arcs(&self) -> &[ArcNodes] {
        &self.arcs
    }

    fn rhs(&self, theta: Vec2) -> DVector<C64> {
        let mut b = DVector::zeros(*self.offsets.last().unwrap());
        for (ia, a) in self.arcs.iter().enumerate() {
            let off = self.offsets[ia];
            match self.bc {
                BoundaryCondition::Dirichlet => {
                    for i in 0..=a.n {
                        b[off + i] = -C64::from_polar(1.0, self.k * theta.dot(&a.points[i]));
                    }
                }
                BoundaryCondition::Neumann => {
                    for i in 1..a.n {
                        let inc = C64::from_polar(1.0, self.k * theta.dot(&a.points[i]));
                        let dn = C64::new(0.0, self.k * theta.dot(&a.normals[i])) * inc;
                        b[off + i - 1] = -a.jac(i) * dn;
                    }
                }
            }
        }
        b
    }

    fn unfold(&self, x: &DVector<C64>) -> Vec<Vec<C64>> {
        self.arcs
            .iter()
            .enumerate()
            .map(|(ia, a)| {
                let off = self.offsets[ia];
                let m = a.len();
                let mut v = vec![C64::new(0.0, 0.0); m];
                match self.bc {
                    BoundaryCondition::Dirichlet => {
                        for j in 0..=a.n {
                            v[j] = x[off + j];
                            v[(m - j) % m] = x[off + j];
                        }
                    }
                    BoundaryCondition::Neumann => {
                        for j in 1..a.n {
                            v[j] = x[off + j - 1];
                            v[m - j] = -x[off + j - 1];
                        }
                    }
                }
                v
            })
            .collect()
    }

    pub fn solve(&self, theta: Vec2) -> Result<DensitySolution> {
        let wave = PlaneWave::new(theta, self.k)?;
        let b = self.rhs(theta);
        let x = self.lu.solve(&b).ok_or_else(|| Error::Solver {
            cond: f64::INFINITY,
            context: "LU back-substitution failed".into(),
        })?;
        let res = (&self.matrix * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
        if res > self.cfg.rhs_tolerance {
            return Err(Error::Solver {
                cond: f64::NAN,
                context: format!("relative residual {res:.3e} above tolerance"),
            });
        }
        Ok(DensitySolution {
            bc: self.bc,
            wave,
            arcs: Arc::clone(&self.arcs),
            values: self.unfold(&x),
        })
    }

    /// Solves for several incident directions with the same factorization.
    pub fn solve_many(&self, thetas: &[Vec2]) -> Result<Vec<DensitySolution>> {
        thetas.par_iter().map(|&t| self.solve(t)).collect()
    }
}

fn fold_dirichlet(w: &DMatrix<C64>, a: &ArcNodes, b: &ArcNodes) -> DMatrix<C64> {
    let mb = b.len();
    DMatrix::from_fn(a.n + 1, b.n + 1, |i, j| {
        let mut v = w[(i, j)];
        if j > 0 && j < b.n {
            v += w[(i, mb - j)];
        }
        0.5 * v
    })
}

fn fold_neumann(w: &DMatrix<C64>, k: f64, a: &ArcNodes, b: &ArcNodes) -> DMatrix<C64> {
    let (ma, mb) = (a.len(), b.len());
    let da = diff_matrix(a.n);
    let db = diff_matrix(b.n);
    let mut full = (&da * w * &db) * C64::new(0.5, 0.0);
    for i in 0..ma {
        for j in 0..mb {
            let nn = a.normals[i].dot(&b.normals[j]);
            full[(i, j)] += 0.5 * k * k * a.jac(i) * nn * b.jac(j) * w[(i, j)];
        }
    }
    DMatrix::from_fn(a.n - 1, b.n - 1, |i, j| full[(i + 1, j + 1)] - full[(i + 1, mb - j - 1)])
}

/// Solves the scattering problem for one incident plane wave.
pub fn solve_density(
    crack: &Crack,
    wave: PlaneWave,
    bc: BoundaryCondition,
    cfg: &NystromConfig,
) -> Result<DensitySolution> {
    Solver::new(crack, wave.k, bc, cfg)?.solve(wave.direction)
}

impl DensitySolution {
    pub fn k(&self) -> f64 {
        self.wave.k
    }

    /// Far-field pattern u_∞(x̂).
    pub fn far_field(&self, obs: Vec2) -> Result<C64> {
        check_unit(obs)?;
        Ok(self.far_field_unchecked(obs))
    }

    pub(crate) fn far_field_unchecked(&self, obs: Vec2) -> C64 {
        let k = self.k();
        let mut acc = C64::new(0.0, 0.0);
        for (a, v) in self.arcs.iter().zip(&self.values) {
            let e = |j: usize| C64::from_polar(1.0, -k * obs.dot(&a.points[j]));
            let h = PI / a.n as f64;
            match self.bc {
                BoundaryCondition::Dirichlet => {
                    let mut s = 0.5 * (v[0] * e(0) + v[a.n] * e(a.n));
                    for j in 1..a.n {
                        s += v[j] * e(j);
                    }
                    acc += h * s;
                }
                BoundaryCondition::Neumann => {
                    let mut s = C64::new(0.0, 0.0);
                    for j in 1..a.n {
                        s += obs.dot(&a.normals[j]) * a.jac(j) * v[j] * e(j);
                    }
                    acc += h * s;
                }
            }
        }
        match self.bc {
            BoundaryCondition::Dirichlet => {
                C64::from_polar(1.0 / (8.0 * PI * k).sqrt(), 0.25 * PI) * acc
            }
            BoundaryCondition::Neumann => {
                C64::from_polar((k / (8.0 * PI)).sqrt(), -0.25 * PI) * acc
            }
        }
    }

    /// Scattered field at a point off the crack (plain trapezoid sums).
    pub fn scattered_field(&self, x: Vec2) -> Result<C64> {
        let k = self.k();
        let mut acc = C64::new(0.0, 0.0);
        for (a, v) in self.arcs.iter().zip(&self.values) {
            let h = PI / a.n as f64;
            for j in 0..=a.n {
                let y = a.points[j];
                let r = (x - y).norm();
                let term = match self.bc {
                    BoundaryCondition::Dirichlet => {
                        let wj = if j == 0 || j == a.n { 0.5 } else { 1.0 };
                        wj * green(k, x, y)? * v[j]
                    }
                    BoundaryCondition::Neumann => {
                        if j == 0 || j == a.n {
                            continue;
                        }
                        let dphi = C64::new(0.0, 0.25 * k)
                            * hankel1(1, k * r)?
                            * (a.normals[j].dot(&(x - y)) / r);
                        dphi * a.jac(j) * v[j]
                    }
                };
                acc += h * term;
            }
        }
        Ok(acc)
    }

    /// Largest |u_inc + u_s| at arc parameters `ts` on arc `target` (Dirichlet only).
    /// The density is resampled on a 4× finer grid and the logarithmic part of
    /// the self-interaction is integrated with the same product weights.
    pub fn boundary_residual(&self, target: usize, ts: &[f64]) -> Result<f64> {
        if self.bc != BoundaryCondition::Dirichlet {
            return Err(Error::config("boundary residual is defined for the Dirichlet condition"));
        }
        let Some(tarc) = self.arcs.get(target) else {
            return Err(Error::config(format!("no arc {target}")));
        };
        let k = self.k();
        let mut worst = 0.0f64;
        for &t in ts {
            if !(t > -1.0 && t < 1.0) {
                return Err(Error::domain(format!("parameter {t} is not interior to the arc")));
            }
            let x = tarc.arc.position(t);
            let tau = t.acos();
            let mut slp = C64::new(0.0, 0.0);
            for (ia, (a, v)) in self.arcs.iter().zip(&self.values).enumerate() {
                let n = a.n;
                let m = 2 * n;
                // cosine coefficients of ψ
                let c: Vec<C64> = (0..=n)
                    .map(|q| {
                        let s: C64 = (0..m).map(|j| v[j] * (q as f64 * j as f64 * PI / n as f64).cos()).sum();
                        let scale = if q == 0 || q == n { 1.0 } else { 2.0 };
                        s * scale / m as f64
                    })
                    .collect();
                let psi = |s: f64| -> C64 { c.iter().enumerate().map(|(q, cq)| cq * (q as f64 * s).cos()).sum() };
                let nf = 4 * n;
                let fine = ArcNodes::new(&a.arc, nf);
                let hf = PI / nf as f64;
                for j in 0..2 * nf {
                    let s = fine.tau[j];
                    let phi = green(k, x, fine.points[j])?;
                    if ia == target {
                        let r = (x - fine.points[j]).norm();
                        let k1 = -bessel_j(0, k * r)? / (2.0 * PI);
                        let k2 = phi - k1 * (tau.cos() - s.cos()).abs().ln();
                        let rw = kress_weights(nf, tau - s) - hf * LN_2;
                        slp += 0.5 * (k1 * rw + hf * k2) * psi(s);
                    } else {
                        slp += 0.5 * hf * phi * psi(s);
                    }
                }
            }
            let inc = C64::from_polar(1.0, k * self.wave.direction.dot(&x));
            worst = worst.max((inc + slp).norm());
        }
        Ok(worst)
    }
}

/// Quick helper: far fields at `obs` for every incident direction.
pub fn far_field_matrix(
    crack: &Crack,
    k: f64,
    bc: BoundaryCondition,
    cfg: &NystromConfig,
    incident: &[Vec2],
    obs: &[Vec2],
) -> Result<DMatrix<C64>> {
    for &o in obs {
        check_unit(o)?;
    }
    let solver = Solver::new(crack, k, bc, cfg)?;
    let sols = solver.solve_many(incident)?;
    Ok(DMatrix::from_fn(obs.len(), incident.len(), |j, l| sols[l].far_field_unchecked(obs[j])))
}
