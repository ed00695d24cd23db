//! Multi-static response matrices: assembly, seeded noise, SVD and the
//! relative singular-value threshold.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{BoundaryCondition, NystromConfig, Solver};
use crate::geometry::Crack;
use crate::{Vec2, C64};

const FULL_VIEW_TOL: f64 = 1e-12;

/// Incident/observation angles on an arc of the unit circle.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    pub alpha: f64,
    pub beta: f64,
    pub angles: Vec<f64>,
}

impl DirectionSet {
    /// θₙ = α + (β − α)(n − 1)/(N − 1), or the equispaced circle when β − α = 2π.
    pub fn new(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("need at least 2 directions, got {n}")));
        }
        let span = beta - alpha;
        if !(span > 0.0) || span > 2.0 * PI + FULL_VIEW_TOL || !alpha.is_finite() {
            return Err(Error::config(format!("invalid aperture ({alpha}, {beta})")));
        }
        let full = (span - 2.0 * PI).abs() < FULL_VIEW_TOL;
        let angles = (0..n)
            .map(|i| {
                if full {
                    alpha + 2.0 * PI * i as f64 / n as f64
                } else {
                    alpha + span * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        Ok(DirectionSet { alpha, beta, angles })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::new(0.0, 2.0 * PI, n)
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn is_full_view(&self) -> bool {
        (self.beta - self.alpha - 2.0 * PI).abs() < FULL_VIEW_TOL
    }

    pub fn vectors(&self) -> Vec<Vec2> {
        self.angles.iter().map(|a| Vec2::new(a.cos(), a.sin())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsrMatrix {
    pub k: f64,
    pub dirs: DirectionSet,
    pub bc: BoundaryCondition,
    /// Entry (j, l) = u_∞(−θⱼ; θ_l).
    pub entries: DMatrix<C64>,
    pub noise: Option<NoiseSpec>,
}

pub fn assemble(
    crack: &Crack,
    k: f64,
    dirs: &DirectionSet,
    bc: BoundaryCondition,
    cfg: &NystromConfig,
) -> Result<MsrMatrix> {
    let solver = Solver::new(crack, k, bc, cfg).map_err(|e| annotate(e, k, None))?;
    let thetas = dirs.vectors();
    let sols: Result<Vec<_>> = thetas
        .par_iter()
        .enumerate()
        .map(|(l, &t)| solver.solve(t).map_err(|e| annotate(e, k, Some(l))))
        .collect();
    let sols = sols?;
    let entries = DMatrix::from_fn(thetas.len(), thetas.len(), |j, l| {
        sols[l].far_field_unchecked(-thetas[j])
    });
    Ok(MsrMatrix { k, dirs: dirs.clone(), bc, entries, noise: None })
}

fn annotate(e: Error, k: f64, l: Option<usize>) -> Error {
    match e {
        Error::Solver { cond, context } => Error::Solver {
            cond,
            context: match l {
                Some(l) => format!("{context} (k = {k}, incident column {}, all rows)", l + 1),
                None => format!("{context} (k = {k})"),
            },
        },
        other => other,
    }
}

/// One matrix per wavenumber, frequencies in parallel.
pub fn assemble_multi(
    crack: &Crack,
    ks: &[f64],
    dirs: &DirectionSet,
    bc: BoundaryCondition,
    cfg: &NystromConfig,
) -> Result<Vec<MsrMatrix>> {
    ks.par_iter().map(|&k| assemble(crack, k, dirs, bc, cfg)).collect()
}

impl MsrMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// ‖K − Kᵀ‖_F / ‖K‖_F.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).norm() / self.entries.norm()
    }
}

/// Adds circular complex Gaussian noise with ‖E‖_F/‖K‖_F = 10^(−snr/20).
pub fn add_noise(m: &MsrMatrix, spec: NoiseSpec) -> Result<MsrMatrix> {
    if !spec.snr_db.is_finite() {
        return Err(Error::config("snr_db must be finite"));
    }
    let e = noise_matrix(m.n(), spec.seed);
    let kn = m.entries.norm();
    if kn == 0.0 {
        return Err(Error::domain("SNR is undefined for a zero matrix"));
    }
    let scale = kn * 10f64.powf(-spec.snr_db / 20.0) / e.norm();
    Ok(MsrMatrix { entries: &m.entries + e * C64::new(scale, 0.0), noise: Some(spec), ..m.clone() })
}

/// Unscaled seeded noise matrix, row-major draw order.
pub fn noise_matrix(n: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut e = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            e[(j, l)] = C64::new(re, im);
        }
    }
    e
}

#[derive(Clone, Debug)]
pub struct SignalSubspace {
    pub k: f64,
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns, ordered like `singular_values`.
    pub u: DMatrix<C64>,
    /// Right singular vectors V (K = U·Σ·V*).
    pub v: DMatrix<C64>,
    pub m_f: usize,
    pub dirs: DirectionSet,
}

/// M_f = max{m : σ_m/σ₁ ≥ τ}; equality counts as retained.
pub fn cut_index(sigmas: &[f64], tau: f64) -> usize {
    let s1 = sigmas[0];
    sigmas.iter().take_while(|&&s| s / s1 >= tau).count()
}

pub fn svd_threshold(m: &MsrMatrix, tau: f64) -> Result<SignalSubspace> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config(format!("threshold must lie in (0, 1), got {tau}")));
    }
    let svd = m.entries.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if !(sigmas[0] > 0.0) {
        return Err(Error::Degenerate("rank-0 response matrix".into()));
    }
    let n = m.n();
    let v_full = vt.adjoint();
    let u = DMatrix::from_fn(n, order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(n, order.len(), |r, c| v_full[(r, order[c])]);
    Ok(SignalSubspace {
        k: m.k,
        m_f: cut_index(&sigmas, tau),
        singular_values: sigmas,
        u,
        v,
        dirs: m.dirs.clone(),
    })
}

impl SignalSubspace {
    /// Re-thresholds without a new decomposition.
    pub fn with_threshold(&self, tau: f64) -> Self {
        SignalSubspace { m_f: cut_index(&self.singular_values, tau), ..self.clone() }
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let mut s = self.u.clone();
        for (c, sig) in self.singular_values.iter().enumerate() {
            s.column_mut(c).scale_mut(*sig);
        }
        s * self.v.adjoint()
    }
}

// --- persistence -----------------------------------------------------------

pub fn write_msr<W: Write>(m: &MsrMatrix, mut w: W) -> Result<()> {
    let (snr, seed) = match m.noise {
        Some(s) => (format!("{:.16e}", s.snr_db), s.seed.to_string()),
        None => ("none".into(), "none".into()),
    };
    let mut out = format!(
        "MSR {} {:.16e} {:.16e} {:.16e} {} {} {}\n",
        m.n(),
        m.k,
        m.dirs.alpha,
        m.dirs.beta,
        m.bc.label(),
        snr,
        seed
    );
    for j in 0..m.n() {
        for l in 0..m.n() {
            let z = m.entries[(j, l)];
            writeln!(out, "{} {} {:.16e} {:.16e}", j + 1, l + 1, z.re, z.im).unwrap();
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_f64(tok: Option<&str>, line: usize, what: &str) -> Result<f64> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { line, msg: format!("bad or missing {what}") })
}

pub fn read_msr<R: BufRead>(r: R) -> Result<MsrMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
    let mut h = header.split_whitespace();
    if h.next() != Some("MSR") {
        return Err(Error::Parse { line: 1, msg: "missing MSR header".into() });
    }
    let n = parse_f64(h.next(), 1, "N")? as usize;
    let k = parse_f64(h.next(), 1, "k")?;
    let alpha = parse_f64(h.next(), 1, "alpha")?;
    let beta = parse_f64(h.next(), 1, "beta")?;
    let bc = match h.next() {
        Some("dirichlet") => BoundaryCondition::Dirichlet,
        Some("neumann") => BoundaryCondition::Neumann,
        _ => return Err(Error::Parse { line: 1, msg: "bc must be dirichlet or neumann".into() }),
    };
    let noise = match (h.next(), h.next()) {
        (Some("none"), Some("none")) => None,
        (Some(s), Some(seed)) => Some(NoiseSpec {
            snr_db: parse_f64(Some(s), 1, "snr")?,
            seed: seed.parse().map_err(|_| Error::Parse { line: 1, msg: "bad seed".into() })?,
        }),
        _ => return Err(Error::Parse { line: 1, msg: "missing snr/seed".into() }),
    };
    let dirs = DirectionSet::new(alpha, beta, n)
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let mut entries = DMatrix::zeros(n, n);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut t = line.split_whitespace();
        let j = parse_f64(t.next(), ln, "j")? as usize;
        let l = parse_f64(t.next(), ln, "l")? as usize;
        if j == 0 || l == 0 || j > n || l > n {
            return Err(Error::Parse { line: ln, msg: format!("index ({j}, {l}) out of range") });
        }
        let re = parse_f64(t.next(), ln, "re")?;
        let im = parse_f64(t.next(), ln, "im")?;
        entries[(j - 1, l - 1)] = C64::new(re, im);
        seen += 1;
    }
    if seen != n * n {
        return Err(Error::Parse { line: seen + 2, msg: format!("expected {} entries, got {seen}", n * n) });
    }
    Ok(MsrMatrix { k, dirs, bc, entries, noise })
}
