//! Frequency weights: unit, k, k² and ln k on the same Γ1 data, and the
//! side lobes of the corresponding band kernels.
//!
//! ```bash
//! cargo run --release --example weighted_imaging
//! ```

use std::f64::consts::PI;

use crack_imaging::analysis::{kernel_predict, map_metrics, side_lobe_ratio, KernelParams, KernelRegime, MetricOptions};
use crack_imaging::cli::config::{preset, Polarization};
use crack_imaging::cli::experiment::run_pipeline;
use crack_imaging::geometry::UnitNormal;
use crack_imaging::imaging::{image_subspace, SteeringMode, WeightScheme};
use crack_imaging::Vec2;

fn main() -> crack_imaging::Result<()> {
    let cfg = preset("Γ1", Polarization::Tm)?;
    let out = run_pipeline(&cfg)?;
    for w in [WeightScheme::Unit, WeightScheme::PowerP(1), WeightScheme::PowerP(2), WeightScheme::Log] {
        let map = image_subspace(&out.subspaces, &cfg.grid, SteeringMode::Tm, &w, &out.data.dirs)?;
        let m = map_metrics(&map, &out.data.crack, MetricOptions::default())?;
        println!("{:<7} peak {:>8.3}  contrast {:.2}", w.label(), map.max(), m.contrast);
    }

    let origin = vec![UnitNormal { point: Vec2::zeros(), normal: Vec2::new(0.0, 1.0) }];
    let p = KernelParams::band(origin, 2.0 * PI / 0.5, 2.0 * PI / 0.4);
    for reg in [KernelRegime::TmBand, KernelRegime::TmWeightedBand] {
        let prof: Vec<f64> = (0..300).map(|i| kernel_predict(reg, Vec2::new(0.004 * i as f64, 0.0), &p)).collect::<Result<_, _>>()?;
        println!("{:<18} side lobe / peak = {:.4}", reg.label(), side_lobe_ratio(&prof).unwrap_or(f64::NAN));
    }
    Ok(())
}
