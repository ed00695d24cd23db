//! Experiment configuration, Table-1 presets and TOML persistence.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::KernelRegime;
use crate::error::{Error, Result};
use crate::forward::{BoundaryCondition, NystromConfig};
use crate::geometry::{catalog, canonical_name, Crack};
use crate::imaging::{FrequencySet, SearchGrid, SteeringMode, WeightScheme};
use crate::msr::{DirectionSet, NoiseSpec};
use crate::refine::{ChebyshevCrack, RefineConfig, TABLE2_INCIDENT, TABLE2_INITIAL};

/// Either a catalog name or Chebyshev graph coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chebyshev: Option<Vec<f64>>,
}

impl CrackConfig {
    pub fn named(name: &str) -> Self {
        CrackConfig { catalog: Some(name.into()), chebyshev: None }
    }

    pub fn build(&self) -> Result<Crack> {
        match (&self.catalog, &self.chebyshev) {
            (Some(n), None) => catalog(n),
            (None, Some(c)) => Ok(ChebyshevCrack::new(c.clone())?.crack()),
            _ => Err(Error::config("crack needs exactly one of `catalog` or `chebyshev`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl ApertureConfig {
    pub fn directions(&self) -> Result<DirectionSet> {
        DirectionSet::new(self.alpha, self.beta, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub lambda_1: f64,
    pub lambda_f: f64,
    pub count: usize,
}

impl FrequencyConfig {
    pub fn wavenumbers(&self) -> Result<FrequencySet> {
        if self.count == 0 || !(self.lambda_1 > 0.0) || !(self.lambda_f > 0.0) {
            return Err(Error::config("frequencies need positive wavelengths and count ≥ 1"));
        }
        FrequencySet::from_wavelengths(self.lambda_1, self.lambda_f, self.count)
    }
}

/// `kind` is one of tm, te_search, te_plain, kirchhoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<usize>,
}

/// Resolved imaging functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    Subspace(SteeringMode),
    Kirchhoff,
}

impl ModeConfig {
    pub fn tm() -> Self {
        ModeConfig { kind: "tm".into(), normals: None }
    }

    pub fn functional(&self) -> Result<Functional> {
        match (self.kind.as_str(), self.normals) {
            ("tm", None) => Ok(Functional::Subspace(SteeringMode::Tm)),
            ("te_plain", None) => Ok(Functional::Subspace(SteeringMode::TePlain)),
            ("te_search", Some(l)) => Ok(Functional::Subspace(SteeringMode::TeSearch { l })),
            ("te_search", None) => Err(Error::config("te_search needs `normals`")),
            ("kirchhoff", None) => Ok(Functional::Kirchhoff),
            (k, _) => Err(Error::config(format!("unsupported mode {k:?} (or stray `normals`)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Nyström nodes per arc for synthetic data.
    pub data_nodes: usize,
    /// Nodes per arc for model solves inside refinement.
    pub model_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { data_nodes: 128, model_nodes: 64 }
    }
}

/// Optional comparison of the map with a kernel prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub regime: String,
    #[serde(default)]
    pub with_lambda: bool,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    /// Incident direction θ (unit vector).
    pub incident: [f64; 2],
    pub initial: Vec<f64>,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub bc: BoundaryCondition,
    pub threshold: f64,
    pub weight: String,
    pub output: String,
    pub crack: CrackConfig,
    pub aperture: ApertureConfig,
    pub frequencies: FrequencyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub grid: SearchGrid,
    pub mode: ModeConfig,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    Tm,
    Te,
}

/// Named apertures: full view, the upper limited view and the three Γ₃ variants.
pub fn named_aperture(name: &str) -> Result<(f64, f64)> {
    match name {
        "full" => Ok((0.0, 2.0 * PI)),
        "upper" => Ok((PI / 6.0, 5.0 * PI / 6.0)),
        "left" => Ok((5.0 * PI / 6.0, 7.0 * PI / 6.0)),
        "lower" => Ok((7.0 * PI / 6.0, 11.0 * PI / 6.0)),
        "right" => Ok((-PI / 6.0, PI / 6.0)),
        _ => Err(Error::Lookup(format!("aperture {name:?} (full, upper, left, lower, right)"))),
    }
}

/// Table-1 configuration for a catalog crack; 15 dB noise, τ = 0.01, h = 0.02.
pub fn preset(crack: &str, pol: Polarization) -> Result<ExperimentConfig> {
    let name = canonical_name(crack)?;
    // (TM N, TE N, F, λ₁, λ_F, Ω, TE normals)
    let (n_tm, n_te, f, l1, lf, omega, normals) = match name {
        "Γ1" => (16, 16, 10, 0.5, 0.4, (-1.0, 1.0, -1.0, 1.0), 8),
        "Γ2" => (28, 36, 12, 0.6, 0.3, (-2.0, 2.0, -2.0, 2.0), 24),
        "Γ3" => (40, 64, 16, 0.5, 0.3, (-2.0, 2.0, -1.0, 3.0), 24),
        _ => (32, 64, 24, 0.4, 0.2, (-1.0, 1.0, -1.0, 1.0), 24),
    };
    let (bc, n, mode, tag) = match pol {
        Polarization::Tm => (BoundaryCondition::Dirichlet, n_tm, ModeConfig::tm(), "TM"),
        Polarization::Te => (
            BoundaryCondition::Neumann,
            n_te,
            ModeConfig { kind: "te_search".into(), normals: Some(normals) },
            "TE",
        ),
    };
    Ok(ExperimentConfig {
        name: format!("{name},{tag}"),
        bc,
        threshold: 0.01,
        weight: "unit".into(),
        output: "out".into(),
        crack: CrackConfig::named(name),
        aperture: ApertureConfig { alpha: 0.0, beta: 2.0 * PI, n },
        frequencies: FrequencyConfig { lambda_1: l1, lambda_f: lf, count: f },
        noise: Some(NoiseSpec { snr_db: 15.0, seed: 1 }),
        grid: SearchGrid::new(omega.0, omega.1, omega.2, omega.3, 0.02)?,
        mode,
        solver: SolverConfig::default(),
        analysis: None,
        refine: None,
    })
}

/// Parses `Γj,TM|TE[,aperture]`.
pub fn preset_from_str(s: &str) -> Result<ExperimentConfig> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let pol = match parts.get(1).map(|p| p.to_ascii_uppercase()) {
        Some(p) if p == "TM" => Polarization::Tm,
        Some(p) if p == "TE" => Polarization::Te,
        _ => return Err(Error::config(format!("preset {s:?} must look like Γ1,TM or Γ3,TE,left"))),
    };
    let mut cfg = preset(parts[0], pol)?;
    match parts.get(2) {
        None => {}
        Some(ap) if parts.len() == 3 => {
            let (a, b) = named_aperture(ap)?;
            cfg.aperture.alpha = a;
            cfg.aperture.beta = b;
            cfg.name = format!("{},{ap}", cfg.name);
        }
        _ => return Err(Error::config(format!("preset {s:?} has too many fields"))),
    }
    Ok(cfg)
}

/// The Γ₂ refinement experiment: k = 2π/0.5, eight directions on [π/6, 5π/6].
pub fn refine_preset() -> ExperimentConfig {
    let d = RefineConfig::default();
    ExperimentConfig {
        name: "Γ2,refine".into(),
        bc: BoundaryCondition::Dirichlet,
        threshold: 0.01,
        weight: "unit".into(),
        output: "out".into(),
        crack: CrackConfig::named("Γ2"),
        aperture: ApertureConfig { alpha: PI / 6.0, beta: 5.0 * PI / 6.0, n: 8 },
        frequencies: FrequencyConfig { lambda_1: 0.5, lambda_f: 0.5, count: 1 },
        noise: None,
        grid: SearchGrid::square(2.0, 0.02).expect("valid grid"),
        mode: ModeConfig::tm(),
        solver: SolverConfig::default(),
        analysis: None,
        refine: Some(RefineSection {
            incident: TABLE2_INCIDENT,
            initial: TABLE2_INITIAL.to_vec(),
            stop_tol: d.stop_tol,
            max_iters: d.max_iters,
            fd_step: d.fd_step,
            damping: d.damping,
        }),
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| {
            let line = e.span().map_or(0, |sp| s[..sp.start].matches('\n').count() + 1);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn weight_scheme(&self) -> Result<WeightScheme> {
        WeightScheme::parse(&self.weight)
    }

    pub fn nystrom(&self) -> NystromConfig {
        NystromConfig::with_nodes(self.solver.data_nodes)
    }

    pub fn refine_config(&self) -> Result<RefineConfig> {
        let r = self.refine.as_ref().ok_or_else(|| Error::config("config has no [refine] section"))?;
        let cfg = RefineConfig {
            stop_tol: r.stop_tol,
            max_iters: r.max_iters,
            fd_step: r.fd_step,
            damping: r.damping,
            nystrom: NystromConfig::with_nodes(self.solver.model_nodes),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full consistency check, including the inverse-crime guard.
    pub fn validate(&self) -> Result<()> {
        self.crack.build()?;
        self.aperture.directions()?;
        self.frequencies.wavenumbers()?;
        SearchGrid::new(self.grid.x_lo, self.grid.x_hi, self.grid.y_lo, self.grid.y_hi, self.grid.h)?;
        self.mode.functional()?;
        self.weight_scheme()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        self.nystrom().validate()?;
        NystromConfig::with_nodes(self.solver.model_nodes).validate()?;
        if self.solver.data_nodes < 2 * self.solver.model_nodes {
            return Err(Error::config(format!(
                "inverse-crime guard: data nodes ({}) must be at least twice the model nodes ({})",
                self.solver.data_nodes, self.solver.model_nodes
            )));
        }
        if let Some(a) = &self.analysis {
            KernelRegime::parse(&a.regime)?;
            if a.samples == 0 {
                return Err(Error::config("analysis samples must be positive"));
            }
        }
        if let Some(r) = &self.refine {
            if self.bc != BoundaryCondition::Dirichlet {
                return Err(Error::config("refinement supports the Dirichlet condition only"));
            }
            let n = (r.incident[0].powi(2) + r.incident[1].powi(2)).sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::config("refine incident direction must be a unit vector"));
            }
            ChebyshevCrack::new(r.initial.clone())?;
            self.refine_config()?;
        }
        Ok(())
    }
}
