//! Closed-form kernels next to the imaging functional of a tiny crack.
//!
//! ```bash
//! cargo run --release --example kernel_predictions
//! ```

use std::f64::consts::PI;

use crack_imaging::analysis::{kernel_predict, ring_integrals, te_full_predict, KernelParams, KernelRegime};
use crack_imaging::forward::{BoundaryCondition, NystromConfig};
use crack_imaging::geometry::{Crack, UnitNormal};
use crack_imaging::imaging::{subspace_values, SteeringMode, WeightScheme};
use crack_imaging::msr::{assemble, svd_threshold, DirectionSet};
use crack_imaging::Vec2;

fn main() -> crack_imaging::Result<()> {
    let center = Vec2::new(0.1, 0.2);
    let crack = Crack::micro_segment(center, 0.01, 0.3);
    let k = 2.0 * PI / 0.5;
    let dirs = DirectionSet::full(64)?;
    let m = assemble(&crack, k, &dirs, BoundaryCondition::Dirichlet, &NystromConfig::with_nodes(64))?;
    let sub = svd_threshold(&m, 0.01)?;

    let pts: Vec<Vec2> = (0..=10).map(|i| center + Vec2::new(0.05 * i as f64, 0.0)).collect();
    let got = subspace_values(std::slice::from_ref(&sub), &pts, SteeringMode::Tm, &WeightScheme::Unit)?;
    let p = KernelParams::single(vec![UnitNormal { point: center, normal: Vec2::new(0.0, 1.0) }], k);
    println!("{:>6} {:>10} {:>10}", "r", "I_D", "J0(kr)^2");
    for (x, v) in pts.iter().zip(&got) {
        println!("{:>6.2} {v:>10.6} {:>10.6}", (x - center).norm(), kernel_predict(KernelRegime::TmSingle, *x, &p)?);
    }

    // Band-averaged TM kernel and the TE near/far forms at the origin point.
    let band = KernelParams::band(vec![UnitNormal { point: Vec2::zeros(), normal: Vec2::new(0.0, 1.0) }], k, 2.0 * PI / 0.4)
        .with_incident(dirs.vectors());
    // TE terms carry (d·ν)², so sample off the tangent line.
    for r in [0.02, 0.1, 0.5] {
        let x = r * Vec2::new(0.6, 0.8);
        let tm = kernel_predict(KernelRegime::TmBand, x, &band)?;
        let te = te_full_predict(x, &band)?;
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("r = {r:<4}: TM_BAND {tm:.4}  TE near {} far {}", fmt(te.near), fmt(te.far));
    }

    let ri = ring_integrals(PI / 6.0, 5.0 * PI / 6.0, k, Vec2::new(0.2, -0.1), Vec2::new(0.0, 1.0), None)?;
    println!(
        "upper-aperture ring integrals: {:.6} / {:.6} (L = {}, tail ≤ {:.1e})",
        ri.plain, ri.weighted, ri.truncation, ri.tail_bound
    );
    Ok(())
}
