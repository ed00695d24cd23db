//! Config-driven pipeline: forward → MSR → SVD → imaging → metrics, and the
//! refinement run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analysis::{map_metrics, validate_map, KernelParams, KernelRegime, MapMetrics, MetricOptions};
use crate::error::{Error, Result};
use crate::geometry::Crack;
use crate::imaging::{image_kirchhoff, image_subspace, ImageMap};
use crate::msr::{add_noise, assemble_multi, svd_threshold, write_msr, DirectionSet, MsrMatrix, NoiseSpec, SignalSubspace};
use crate::refine::{newton_refine, write_trajectory, ChebyshevCrack, FarFieldData, NewtonState};
use crate::Vec2;

use super::config::{ExperimentConfig, Functional};
use super::manifest::RunManifest;

/// Synthetic data for one configuration.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub crack: Crack,
    pub dirs: DirectionSet,
    pub matrices: Vec<MsrMatrix>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub data: Dataset,
    pub subspaces: Vec<SignalSubspace>,
    pub map: ImageMap,
    /// `None` when the crack does not fit in the search region.
    pub metrics: Option<MapMetrics>,
}

/// Frequency f gets noise seed `seed + f`.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let crack = cfg.crack.build()?;
    let dirs = cfg.aperture.directions()?;
    let ks = cfg.frequencies.wavenumbers()?;
    let mut matrices = assemble_multi(&crack, &ks.ks, &dirs, cfg.bc, &cfg.nystrom())?;
    if let Some(n) = cfg.noise {
        matrices = matrices
            .iter()
            .enumerate()
            .map(|(f, m)| add_noise(m, NoiseSpec { snr_db: n.snr_db, seed: n.seed.wrapping_add(f as u64) }))
            .collect::<Result<_>>()?;
    }
    Ok(Dataset { crack, dirs, matrices })
}

pub fn decompose(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<SignalSubspace>> {
    data.matrices.iter().map(|m| svd_threshold(m, cfg.threshold)).collect()
}

pub fn image(cfg: &ExperimentConfig, data: &Dataset, subs: &[SignalSubspace]) -> Result<ImageMap> {
    let mut map = match cfg.mode.functional()? {
        Functional::Subspace(mode) => image_subspace(subs, &cfg.grid, mode, &cfg.weight_scheme()?, &data.dirs)?,
        Functional::Kirchhoff => image_kirchhoff(&data.matrices, &cfg.grid, &data.dirs)?,
    };
    map.meta.insert("name".into(), cfg.name.clone());
    map.meta.insert("bc".into(), cfg.bc.label().into());
    map.meta.insert("threshold".into(), format!("{}", cfg.threshold));
    map.meta.insert(
        "noise".into(),
        cfg.noise.map_or("none".into(), |n| format!("{} dB seed {}", n.snr_db, n.seed)),
    );
    Ok(map)
}

pub fn metrics(cfg: &ExperimentConfig, crack: &Crack, map: &ImageMap) -> Result<Option<MapMetrics>> {
    let opts = MetricOptions::default();
    let Some(a) = &cfg.analysis else {
        return match map_metrics(map, crack, opts) {
            Ok(m) => Ok(Some(m)),
            Err(Error::Config(_)) => Ok(None),
            Err(e) => Err(e),
        };
    };
    let regime = KernelRegime::parse(&a.regime)?;
    let ks = cfg.frequencies.wavenumbers()?.ks;
    let pts = crack.sample_points(a.samples);
    let dirs = cfg.aperture.directions()?;
    let params = KernelParams::band(pts, ks[0], *ks.last().unwrap())
        .with_incident(dirs.vectors())
        .with_aperture(cfg.aperture.alpha, cfg.aperture.beta)
        .with_lambda(a.with_lambda);
    validate_map(map, crack, regime, &params, opts).map(Some)
}

/// In-memory run of the whole imaging pipeline.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let data = synthesize(cfg)?;
    let subspaces = decompose(cfg, &data)?;
    let map = image(cfg, &data, &subspaces)?;
    let metrics = metrics(cfg, &data.crack, &map)?;
    Ok(PipelineOutput { data, subspaces, map, metrics })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stages {
    /// MSR files only.
    Forward,
    /// MSR files, map, metadata and metrics.
    Image,
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_config(cfg: &ExperimentConfig, dir: &Path, man: &mut RunManifest) -> Result<()> {
    man.config = cfg.to_toml()?;
    man.seed = cfg.noise.map(|n| n.seed);
    fs::write(dir.join("config.toml"), &man.config)?;
    let h = super::manifest::hash_file(&dir.join("config.toml"))?;
    man.inputs.insert("config.toml".into(), h);
    Ok(())
}

/// Runs the pipeline, writing artifacts and `manifest.json` into `cfg.output`.
/// On failure the manifest still records the completed stages and the error.
pub fn run_experiment(cfg: &ExperimentConfig, stages: Stages) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let mut man = RunManifest::default();
    let res = run_stages(cfg, stages, &dir, &mut man);
    if let Err(e) = &res {
        man.error = Some(e.to_string());
    }
    man.write(&dir.join("manifest.json"))?;
    res.map(|_| man)
}

fn run_stages(cfg: &ExperimentConfig, stages: Stages, dir: &Path, man: &mut RunManifest) -> Result<()> {
    write_config(cfg, dir, man)?;

    let t = Instant::now();
    let data = synthesize(cfg)?;
    man.finish_stage("forward", t);
    for (f, m) in data.matrices.iter().enumerate() {
        let name = format!("msr_{:02}.txt", f + 1);
        let mut buf = Vec::new();
        write_msr(m, &mut buf)?;
        fs::write(dir.join(&name), buf)?;
        man.record_output(dir, &name)?;
    }
    if stages == Stages::Forward {
        return Ok(());
    }

    let t = Instant::now();
    let subs = decompose(cfg, &data)?;
    man.finish_stage("svd", t);

    let t = Instant::now();
    let map = image(cfg, &data, &subs)?;
    man.finish_stage("imaging", t);
    let mut csv = Vec::new();
    map.write_csv(&mut csv)?;
    fs::write(dir.join("map.csv"), csv)?;
    let mut meta = Vec::new();
    map.write_meta(&mut meta)?;
    fs::write(dir.join("map.meta"), meta)?;
    man.record_output(dir, "map.csv")?;
    man.record_output(dir, "map.meta")?;

    let t = Instant::now();
    let text = match metrics(cfg, &data.crack, &map)? {
        Some(m) => {
            let mut buf = Vec::new();
            m.write(&mut buf)?;
            String::from_utf8(buf).expect("ascii metrics")
        }
        None => "status = crack outside search region\n".into(),
    };
    fs::write(dir.join("metrics.txt"), text)?;
    man.record_output(dir, "metrics.txt")?;
    man.finish_stage("metrics", t);
    Ok(())
}

/// Far-field data for the refinement run.
pub fn refine_data(cfg: &ExperimentConfig) -> Result<FarFieldData> {
    cfg.validate()?;
    let r = cfg.refine.as_ref().ok_or_else(|| Error::config("config has no [refine] section"))?;
    let k = cfg.frequencies.wavenumbers()?.ks[0];
    let theta = Vec2::new(r.incident[0], r.incident[1]);
    let data = FarFieldData::synthesize(&cfg.crack.build()?, k, theta, &cfg.aperture.directions()?, &cfg.nystrom())?;
    match cfg.noise {
        Some(n) => data.with_noise(n.snr_db, n.seed),
        None => Ok(data),
    }
}

/// Gauss–Newton from the `[refine]` start; writes `trajectory.csv`.
pub fn run_refine(cfg: &ExperimentConfig) -> Result<(Vec<NewtonState>, RunManifest)> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let mut man = RunManifest::default();
    let res = (|| -> Result<Vec<NewtonState>> {
        write_config(cfg, &dir, &mut man)?;
        let t = Instant::now();
        let data = refine_data(cfg)?;
        man.finish_stage("forward", t);
        let t = Instant::now();
        let start = ChebyshevCrack::new(cfg.refine.as_ref().expect("validated").initial.clone())?;
        let traj = newton_refine(&start, &data, &cfg.refine_config()?)?;
        man.finish_stage("refine", t);
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf)?;
        fs::write(dir.join("trajectory.csv"), buf)?;
        man.record_output(&dir, "trajectory.csv")?;
        Ok(traj)
    })();
    if let Err(e) = &res {
        man.error = Some(e.to_string());
    }
    man.write(&dir.join("manifest.json"))?;
    res.map(|t| (t, man))
}
