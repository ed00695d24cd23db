//! Gauss–Newton refinement of a Chebyshev-graph crack from far-field data.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{solve_density, BoundaryCondition, NystromConfig, PlaneWave};
use crate::geometry::{catalog, chebyshev_with_derivative, Crack, ParametricArc};
use crate::imaging::ImageMap;
use crate::msr::DirectionSet;
use crate::{Vec2, C64};

/// Graph crack z(s) = (s, Σⱼ aⱼTⱼ(s)), s ∈ [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevCrack {
    pub coeffs: Vec<f64>,
}

impl ChebyshevCrack {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("Chebyshev coefficients must be finite and non-empty"));
        }
        let c = ChebyshevCrack { coeffs };
        let arc = c.arc();
        if !arc.is_injective(257) || !arc.has_no_cusp(257) {
            return Err(Error::domain("coefficients do not induce a simple smooth arc"));
        }
        Ok(c)
    }

    pub fn arc(&self) -> ParametricArc {
        ParametricArc::chebyshev(self.coeffs.clone())
    }

    pub fn crack(&self) -> Crack {
        Crack::single(self.arc())
    }

    pub fn height(&self, s: f64) -> f64 {
        chebyshev_with_derivative(&self.coeffs, s).0
    }
}

/// Observed far field for one incident wave at a set of observation directions.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldData {
    pub k: f64,
    pub incident: Vec2,
    pub directions: Vec<Vec2>,
    pub values: Vec<C64>,
}

impl FarFieldData {
    /// Dirichlet far field of `crack` at `dirs`.
    pub fn synthesize(crack: &Crack, k: f64, incident: Vec2, dirs: &DirectionSet, cfg: &NystromConfig) -> Result<Self> {
        let directions = dirs.vectors();
        let values = far_fields(crack, k, incident, &directions, cfg)?;
        Ok(FarFieldData { k, incident, directions, values })
    }

    /// Complex Gaussian noise with ‖e‖/‖u‖ = 10^(−snr/20).
    pub fn with_noise(&self, snr_db: f64, seed: u64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite"));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let e: Vec<C64> = self
            .values
            .iter()
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            })
            .collect();
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = norm(&self.values) * 10f64.powf(-snr_db / 20.0) / norm(&e);
        let values = self.values.iter().zip(&e).map(|(u, n)| u + n * scale).collect();
        Ok(FarFieldData { values, ..self.clone() })
    }
}

fn far_fields(crack: &Crack, k: f64, incident: Vec2, obs: &[Vec2], cfg: &NystromConfig) -> Result<Vec<C64>> {
    let sol = solve_density(crack, PlaneWave::new(incident, k)?, BoundaryCondition::Dirichlet, cfg)?;
    obs.iter().map(|o| sol.far_field(*o)).collect()
}

/// Stacked (Re, Im) of u_comp − u_data.
pub fn residual_vector(c: &ChebyshevCrack, data: &FarFieldData, cfg: &NystromConfig) -> Result<DVector<f64>> {
    let u = far_fields(&c.crack(), data.k, data.incident, &data.directions, cfg)?;
    let n = u.len();
    let mut r = DVector::zeros(2 * n);
    for (j, (a, b)) in u.iter().zip(&data.values).enumerate() {
        let d = a - b;
        r[j] = d.re;
        r[n + j] = d.im;
    }
    Ok(r)
}

/// R = ½ Σⱼ |u_data(x̂ⱼ) − u_comp(x̂ⱼ)|².
pub fn residual(c: &ChebyshevCrack, data: &FarFieldData, cfg: &NystromConfig) -> Result<f64> {
    Ok(0.5 * residual_vector(c, data, cfg)?.norm_squared())
}

/// Central-difference Jacobian of [`residual_vector`], one column per coefficient.
pub fn jacobian(c: &ChebyshevCrack, data: &FarFieldData, cfg: &NystromConfig, step: f64) -> Result<DMatrix<f64>> {
    let cols: Vec<DVector<f64>> = (0..c.coeffs.len())
        .into_par_iter()
        .map(|i| {
            let shifted = |s: f64| {
                let mut a = c.coeffs.clone();
                a[i] += s;
                residual_vector(&ChebyshevCrack { coeffs: a }, data, cfg)
            };
            Ok((shifted(step)? - shifted(-step)?) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    /// Stop when |R(n) − R(n−1)| < stop_tol.
    pub stop_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    /// Tikhonov damping μ in (JᵀJ + μI)δ = −Jᵀr.
    pub damping: f64,
    pub nystrom: NystromConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { stop_tol: 1e-3, max_iters: 20, fd_step: 1e-6, damping: 1e-8, nystrom: NystromConfig::fast() }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_tol > 0.0 && self.fd_step > 0.0 && self.damping > 0.0 && self.max_iters > 0) {
            return Err(Error::config("refine settings must all be positive"));
        }
        self.nystrom.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonState {
    pub iter: usize,
    pub coeffs: Vec<f64>,
    pub residual: f64,
    pub history: Vec<f64>,
}

fn iteration_error(iter: usize, msg: impl Into<String>, last: &NewtonState) -> Error {
    Error::Iteration { iter, msg: msg.into(), last_coeffs: last.coeffs.clone(), last_residual: last.residual }
}

/// Damped Gauss–Newton; returns the trajectory starting with iteration 0.
///
/// A step that raises R is retried with μ ×10 (up to eight times); if none
/// helps, the previous iterate is repeated, which triggers the stop rule.
pub fn newton_refine(initial: &ChebyshevCrack, data: &FarFieldData, cfg: &RefineConfig) -> Result<Vec<NewtonState>> {
    cfg.validate()?;
    let nc = &cfg.nystrom;
    let r0 = residual(initial, data, nc)?;
    if !r0.is_finite() {
        return Err(Error::Iteration {
            iter: 0,
            msg: "non-finite residual".into(),
            last_coeffs: initial.coeffs.clone(),
            last_residual: r0,
        });
    }
    let mut traj = vec![NewtonState { iter: 0, coeffs: initial.coeffs.clone(), residual: r0, history: vec![r0] }];
    let p = initial.coeffs.len();
    for n in 1..=cfg.max_iters {
        let last = traj.last().unwrap().clone();
        let cur = ChebyshevCrack { coeffs: last.coeffs.clone() };
        let fail = |e: Error| match e {
            Error::Iteration { .. } => e,
            other => iteration_error(n, other.to_string(), &last),
        };
        let j = jacobian(&cur, data, nc, cfg.fd_step).map_err(fail)?;
        let r = residual_vector(&cur, data, nc).map_err(fail)?;
        let jt = j.transpose();
        let (jtj, g) = (&jt * &j, -(&jt * &r));
        let mut mu = cfg.damping;
        let mut next = None;
        for _ in 0..=8 {
            let a = &jtj + DMatrix::identity(p, p) * mu;
            let delta = a.lu().solve(&g).ok_or_else(|| iteration_error(n, "singular damped normal equations", &last))?;
            if delta.iter().any(|d| !d.is_finite()) {
                return Err(iteration_error(n, "non-finite Newton step", &last));
            }
            let coeffs: Vec<f64> = last.coeffs.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let cand = ChebyshevCrack::new(coeffs).map_err(|e| iteration_error(n, format!("invalid intermediate arc: {e}"), &last))?;
            let rn = residual(&cand, data, nc).map_err(fail)?;
            if !rn.is_finite() {
                return Err(iteration_error(n, "non-finite residual", &last));
            }
            if rn <= last.residual {
                next = Some((cand.coeffs, rn));
                break;
            }
            mu *= 10.0;
        }
        let (coeffs, rn) = next.unwrap_or((last.coeffs.clone(), last.residual));
        let mut history = last.history.clone();
        history.push(rn);
        traj.push(NewtonState { iter: n, coeffs, residual: rn, history });
        if (rn - last.residual).abs() < cfg.stop_tol {
            break;
        }
    }
    Ok(traj)
}

/// CSV `iter,a0,…,a{p},R`.
pub fn write_trajectory<W: Write>(traj: &[NewtonState], mut w: W) -> Result<()> {
    let p = traj.first().map_or(0, |s| s.coeffs.len());
    let mut out = String::from("iter");
    for j in 0..p {
        out.push_str(&format!(",a{j}"));
    }
    out.push_str(",R\n");
    for s in traj {
        out.push_str(&format!("{}", s.iter));
        for a in &s.coeffs {
            out.push_str(&format!(",{a}"));
        }
        out.push_str(&format!(",{}\n", s.residual));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Least-squares Chebyshev fit (degree p) of the graph through `points`.
pub fn fit_chebyshev_to_points(points: &[Vec2], p: usize) -> Result<ChebyshevCrack> {
    if points.len() < p + 1 {
        return Err(Error::domain(format!("need at least {} points for degree {p}", p + 1)));
    }
    if points.iter().any(|q| q.x.abs() > 1.0) {
        return Err(Error::domain("graph abscissae must lie in [-1, 1]"));
    }
    let a = DMatrix::from_fn(points.len(), p + 1, |i, j| {
        let mut e = vec![0.0; j + 1];
        e[j] = 1.0;
        chebyshev_with_derivative(&e, points[i].x).0
    });
    let b = DVector::from_iterator(points.len(), points.iter().map(|q| q.y));
    let sol = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::domain(e.to_string()))?;
    ChebyshevCrack::new(sol.iter().copied().collect())
}

/// Column-wise ridge of a map: for each x column inside [−1, 1], the height of
/// the largest value, kept when it reaches `frac` of the global maximum.
pub fn ridge_points(map: &ImageMap, frac: f64) -> Vec<Vec2> {
    let g = &map.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let top = map.max();
    let mut out = Vec::new();
    for ix in 0..nx {
        let x = g.x_lo + ix as f64 * g.h;
        if x.abs() > 1.0 {
            continue;
        }
        let (iy, v) = (0..ny)
            .map(|iy| (iy, map.values[iy * nx + ix]))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if v >= frac * top {
            out.push(Vec2::new(x, g.y_lo + iy as f64 * g.h));
        }
    }
    out
}

/// The Γ₂ refinement experiment: data, starting point and target.
#[derive(Clone, Debug)]
pub struct Table2Setup {
    pub data: FarFieldData,
    pub initial: ChebyshevCrack,
    pub target: Vec<f64>,
}

pub const TABLE2_INITIAL: [f64; 6] = [0.2741, 0.2267, -0.2062, -0.0276, -0.0678, 0.0009];
pub const TABLE2_TARGET: [f64; 6] = [0.26, 0.23, -0.22, -0.03, -0.06, 0.00];

/// k = 2π/0.5, eight observation directions on [π/6, 5π/6], θ = (0, −1);
/// data from catalog Γ₂ at `data_nodes`, optionally noisy.
/// Default incident direction for the Γ2 refinement run.
pub const TABLE2_INCIDENT: [f64; 2] = [1.0, 0.0];

pub fn table2_setup(data_nodes: usize, incident: Vec2, noise: Option<(f64, u64)>) -> Result<Table2Setup> {
    let dirs = DirectionSet::new(PI / 6.0, 5.0 * PI / 6.0, 8)?;
    let cfg = NystromConfig::with_nodes(data_nodes);
    let mut data = FarFieldData::synthesize(&catalog("Γ2")?, 2.0 * PI / 0.5, incident, &dirs, &cfg)?;
    if let Some((snr, seed)) = noise {
        data = data.with_noise(snr, seed)?;
    }
    Ok(Table2Setup { data, initial: ChebyshevCrack::new(TABLE2_INITIAL.to_vec())?, target: TABLE2_TARGET.to_vec() })
}
