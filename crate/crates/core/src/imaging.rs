//! Steering vectors and the imaging functionals evaluated over a search grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::msr::{DirectionSet, MsrMatrix, SignalSubspace};
use crate::{Vec2, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySet {
    pub ks: Vec<f64>,
}

impl FrequencySet {
    pub fn new(ks: Vec<f64>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::config("frequency set is empty"));
        }
        if ks.iter().any(|k| !(*k > 0.0)) || ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("wavenumbers must be positive and strictly increasing"));
        }
        Ok(FrequencySet { ks })
    }

    /// F wavenumbers equispaced in [2π/λ₁, 2π/λ_F].
    pub fn from_wavelengths(lambda_1: f64, lambda_f: f64, f: usize) -> Result<Self> {
        let (k1, kf) = (2.0 * std::f64::consts::PI / lambda_1, 2.0 * std::f64::consts::PI / lambda_f);
        if f == 1 {
            return Self::new(vec![k1]);
        }
        Self::new((0..f).map(|i| k1 + (kf - k1) * i as f64 / (f - 1) as f64).collect())
    }
}

/// Rectangular search region Ω with step h, row-major (x fastest).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub h: f64,
}

impl SearchGrid {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(x_hi >= x_lo) || !(y_hi >= y_lo) {
            return Err(Error::config("search grid needs h > 0 and ordered bounds"));
        }
        Ok(SearchGrid { x_lo, x_hi, y_lo, y_hi, h })
    }

    pub fn square(half: f64, h: f64) -> Result<Self> {
        Self::new(-half, half, -half, half, h)
    }

    // The 1e-9 guard keeps exact multiples such as 2/0.02 from losing a row.
    fn count(span: f64, h: f64) -> usize {
        (span / h + 1e-9).floor() as usize + 1
    }

    pub fn nx(&self) -> usize {
        Self::count(self.x_hi - self.x_lo, self.h)
    }

    pub fn ny(&self) -> usize {
        Self::count(self.y_hi - self.y_lo, self.h)
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, idx: usize) -> Vec2 {
        let nx = self.nx();
        Vec2::new(self.x_lo + (idx % nx) as f64 * self.h, self.y_lo + (idx / nx) as f64 * self.h)
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_lo && p.x <= self.x_hi && p.y >= self.y_lo && p.y <= self.y_hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteeringMode {
    Tm,
    /// TE steering maximized over L candidate normals.
    TeSearch { l: usize },
    /// Plain TM steering applied to TE data.
    TePlain,
}

impl SteeringMode {
    pub fn label(&self) -> String {
        match self {
            SteeringMode::Tm => "TM".into(),
            SteeringMode::TeSearch { l } => format!("TE_search(L={l})"),
            SteeringMode::TePlain => "TE_plain".into(),
        }
    }
}

#[derive(Clone)]
pub enum WeightScheme {
    Unit,
    PowerP(u32),
    Log,
    Custom { name: String, zeta: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl WeightScheme {
    pub fn weight(&self, k: f64) -> f64 {
        match self {
            WeightScheme::Unit => 1.0,
            WeightScheme::PowerP(p) => k.powi(*p as i32),
            WeightScheme::Log => k.ln(),
            WeightScheme::Custom { zeta, .. } => zeta(k),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightScheme::Unit => "unit".into(),
            WeightScheme::PowerP(p) => format!("power{p}"),
            WeightScheme::Log => "log".into(),
            WeightScheme::Custom { name, .. } => name.clone(),
        }
    }

    /// Parses `unit`, `log`, `power<p>`, `sqrt`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightScheme::Unit),
            "log" => Ok(WeightScheme::Log),
            "sqrt" => Ok(WeightScheme::Custom { name: "sqrt".into(), zeta: Arc::new(f64::sqrt) }),
            _ => match s.strip_prefix("power").and_then(|p| p.parse::<u32>().ok()) {
                Some(p) if p >= 1 => Ok(WeightScheme::PowerP(p)),
                _ => Err(Error::config(format!("unknown weight scheme {s:?}"))),
            },
        }
    }
}

/// e^{ikθₙ·x}/√N.
pub fn steering_tm(x: Vec2, k: f64, dirs: &DirectionSet) -> Vec<C64> {
    let s = 1.0 / (dirs.len() as f64).sqrt();
    dirs.angles
        .iter()
        .map(|a| C64::from_polar(s, k * (a.cos() * x.x + a.sin() * x.y)))
        .collect()
}

/// (θₙ·ν)e^{ikθₙ·x}, normalized to unit length.
pub fn steering_te(x: Vec2, k: f64, dirs: &DirectionSet, nu: Vec2) -> Result<Vec<C64>> {
    if (nu.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::domain("candidate normal must be a unit vector"));
    }
    let raw: Vec<C64> = dirs
        .angles
        .iter()
        .map(|a| {
            let th = Vec2::new(a.cos(), a.sin());
            C64::from_polar(th.dot(&nu), k * th.dot(&x))
        })
        .collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-14 {
        return Err(Error::Degenerate(format!("θₙ·ν vanishes for every direction, ν = ({}, {})", nu.x, nu.y)));
    }
    Ok(raw.into_iter().map(|z| z / norm).collect())
}

/// Candidate normals ν_l = (cos 2πl/L, sin 2πl/L), l = 1..L.
pub fn candidate_normals(l: usize) -> Vec<Vec2> {
    (1..=l)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / l as f64;
            Vec2::new(a.cos(), a.sin())
        })
        .collect()
}

fn conj_dot(s: &[C64], col: impl Iterator<Item = C64>) -> C64 {
    s.iter().zip(col).map(|(a, b)| a.conj() * b).sum()
}

/// Real-valued samples of an imaging functional over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMap {
    pub grid: SearchGrid,
    pub values: Vec<f64>,
    /// Provenance as ordered key/value pairs.
    pub meta: BTreeMap<String, String>,
}

fn check_dirs(subs: &[&DirectionSet], dirs: &DirectionSet) -> Result<()> {
    if subs.iter().any(|d| *d != dirs) {
        return Err(Error::config("direction sets of the data do not match"));
    }
    Ok(())
}

fn check_increasing(ks: &[f64]) -> Result<()> {
    if ks.is_empty() || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("frequencies must be strictly increasing"));
    }
    Ok(())
}

fn base_meta(kind: &str, ks: &[f64], dirs: &DirectionSet, weight: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("kind".into(), kind.into());
    m.insert(
        "frequencies".into(),
        ks.iter().map(|k| format!("{k}")).collect::<Vec<_>>().join(" "),
    );
    m.insert("aperture".into(), format!("{} {} {}", dirs.alpha, dirs.beta, dirs.len()));
    m.insert("weight".into(), weight.into());
    m
}

// Per-point value of the subspace functional; the (f, m) order is fixed.
fn subspace_point(
    x: Vec2,
    subs: &[SignalSubspace],
    mode: SteeringMode,
    weight: &WeightScheme,
    normals: &[Vec2],
) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for s in subs {
        let w = weight.weight(s.k);
        let n = s.dirs.len();
        match mode {
            SteeringMode::Tm | SteeringMode::TePlain => {
                let st = steering_tm(x, s.k, &s.dirs);
                for m in 0..s.m_f {
                    let a = conj_dot(&st, s.u.column(m).iter().copied());
                    let b = conj_dot(&st, s.v.column(m).iter().map(|z| z.conj()));
                    acc += w * a * b;
                }
            }
            SteeringMode::TeSearch { .. } => {
                // θ·ν is linear in ν, so project once onto the x and y parts.
                let th: Vec<Vec2> = s.dirs.vectors();
                let e: Vec<C64> = th.iter().map(|t| C64::from_polar(1.0, s.k * t.dot(&x))).collect();
                let sx: Vec<C64> = (0..n).map(|i| e[i] * th[i].x).collect();
                let sy: Vec<C64> = (0..n).map(|i| e[i] * th[i].y).collect();
                let norms: Vec<f64> = normals
                    .iter()
                    .map(|nu| th.iter().map(|t| t.dot(nu).powi(2)).sum::<f64>().sqrt())
                    .collect();
                if norms.iter().all(|&v| v < 1e-14) {
                    return Err(Error::Degenerate("no admissible candidate normal".into()));
                }
                for m in 0..s.m_f {
                    let ax = conj_dot(&sx, s.u.column(m).iter().copied());
                    let ay = conj_dot(&sy, s.u.column(m).iter().copied());
                    let bx = conj_dot(&sx, s.v.column(m).iter().map(|z| z.conj()));
                    let by = conj_dot(&sy, s.v.column(m).iter().map(|z| z.conj()));
                    let mut best = C64::new(0.0, 0.0);
                    let mut best_mod = -1.0;
                    for (nu, &nn) in normals.iter().zip(&norms) {
                        if nn < 1e-14 {
                            continue;
                        }
                        let t = (ax * nu.x + ay * nu.y) * (bx * nu.x + by * nu.y) / (nn * nn);
                        if t.norm() > best_mod {
                            best_mod = t.norm();
                            best = t;
                        }
                    }
                    acc += w * best;
                }
            }
        }
    }
    Ok(acc.norm() / subs.len() as f64)
}

/// Subspace functional at arbitrary points.
pub fn subspace_values(
    subs: &[SignalSubspace],
    points: &[Vec2],
    mode: SteeringMode,
    weight: &WeightScheme,
) -> Result<Vec<f64>> {
    let normals = match mode {
        SteeringMode::TeSearch { l } if l < 2 => {
            return Err(Error::config("TE search needs at least 2 candidate normals"))
        }
        SteeringMode::TeSearch { l } => candidate_normals(l),
        _ => Vec::new(),
    };
    points.par_iter().map(|&x| subspace_point(x, subs, mode, weight, &normals)).collect()
}

pub fn image_subspace(
    subs: &[SignalSubspace],
    grid: &SearchGrid,
    mode: SteeringMode,
    weight: &WeightScheme,
    dirs: &DirectionSet,
) -> Result<ImageMap> {
    check_dirs(&subs.iter().map(|s| &s.dirs).collect::<Vec<_>>(), dirs)?;
    let ks: Vec<f64> = subs.iter().map(|s| s.k).collect();
    check_increasing(&ks)?;
    let values = subspace_values(subs, &grid.points(), mode, weight)?;
    let mut meta = base_meta(&format!("subspace {}", mode.label()), &ks, dirs, &weight.label());
    meta.insert(
        "cut_indices".into(),
        subs.iter().map(|s| s.m_f.to_string()).collect::<Vec<_>>().join(" "),
    );
    Ok(ImageMap { grid: *grid, values, meta })
}

/// Kirchhoff functional at arbitrary points.
pub fn kirchhoff_values(mats: &[MsrMatrix], points: &[Vec2]) -> Vec<f64> {
    points
        .par_iter()
        .map(|&x| {
            let mut acc = C64::new(0.0, 0.0);
            for m in mats {
                let s = steering_tm(x, m.k, &m.dirs);
                let n = s.len();
                for j in 0..n {
                    let mut row = C64::new(0.0, 0.0);
                    for l in 0..n {
                        row += m.entries[(j, l)] * s[l].conj();
                    }
                    acc += s[j].conj() * row;
                }
            }
            acc.norm() / mats.len() as f64
        })
        .collect()
}

pub fn image_kirchhoff(mats: &[MsrMatrix], grid: &SearchGrid, dirs: &DirectionSet) -> Result<ImageMap> {
    check_dirs(&mats.iter().map(|m| &m.dirs).collect::<Vec<_>>(), dirs)?;
    let ks: Vec<f64> = mats.iter().map(|m| m.k).collect();
    check_increasing(&ks)?;
    let values = kirchhoff_values(mats, &grid.points());
    Ok(ImageMap { grid: *grid, values, meta: base_meta("kirchhoff", &ks, dirs, "unit") })
}

impl ImageMap {
    pub fn from_fn(grid: SearchGrid, f: impl Fn(Vec2) -> f64 + Sync) -> Self {
        let values = grid.points().par_iter().map(|&p| f(p)).collect();
        ImageMap { grid, values, meta: BTreeMap::new() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point of the largest value (first in row-major order on ties).
    pub fn argmax(&self) -> Vec2 {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.grid.point(best)
    }

    pub fn nearest_index(&self, p: Vec2) -> usize {
        let g = &self.grid;
        let ix = (((p.x - g.x_lo) / g.h).round().max(0.0) as usize).min(g.nx() - 1);
        let iy = (((p.y - g.y_lo) / g.h).round().max(0.0) as usize).min(g.ny() - 1);
        iy * g.nx() + ix
    }

    /// Bilinear interpolation, clamped to Ω.
    pub fn interpolate(&self, p: Vec2) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let fx = ((p.x - g.x_lo) / g.h).clamp(0.0, (nx - 1) as f64);
        let fy = ((p.y - g.y_lo) / g.h).clamp(0.0, (ny - 1) as f64);
        let (ix, iy) = ((fx.floor() as usize).min(nx.saturating_sub(2)), (fy.floor() as usize).min(ny.saturating_sub(2)));
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |i: usize, j: usize| self.values[(j.min(ny - 1)) * nx + i.min(nx - 1)];
        (1.0 - tx) * (1.0 - ty) * at(ix, iy)
            + tx * (1.0 - ty) * at(ix + 1, iy)
            + (1.0 - tx) * ty * at(ix, iy + 1)
            + tx * ty * at(ix + 1, iy + 1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::from("x,y,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            out.push_str(&format!("{},{},{}\n", p.x, p.y, v));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn write_meta<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("{k} = {v}\n"));
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Reads `x,y,value` rows; returns the points and values in file order.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if ln == 1 {
            if line.trim() != "x,y,value" {
                return Err(Error::Parse { line: 1, msg: "expected header x,y,value".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match (f.len(), f.first().and_then(|s| parse(s)), f.get(1).and_then(|s| parse(s)), f.get(2).and_then(|s| parse(s))) {
            (3, Some(x), Some(y), Some(v)) => rows.push((x, y, v)),
            _ => return Err(Error::Parse { line: ln, msg: format!("malformed row {line:?}") }),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    Ok(rows)
}
