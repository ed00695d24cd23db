//! TE polarization: searching over candidate normals recovers the crack,
//! while plain TM steering shows the two-curve pattern either side of it.
//!
//! ```bash
//! cargo run --release --example te_imaging
//! ```

use crack_imaging::cli::config::{preset, Polarization};
use crack_imaging::cli::experiment::{decompose, synthesize};
use crack_imaging::imaging::{subspace_values, SteeringMode, WeightScheme};
use crack_imaging::Vec2;

fn main() -> crack_imaging::Result<()> {
    let cfg = preset("Γ1", Polarization::Te)?;
    let data = synthesize(&cfg)?;
    let subs = decompose(&cfg, &data)?;

    // Vertical cut through the middle of Γ1 (y = 0.3).
    let ys: Vec<f64> = (0..=40).map(|i| -0.1 + 0.02 * i as f64).collect();
    let pts: Vec<Vec2> = ys.iter().map(|&y| Vec2::new(0.0, y)).collect();
    let search = subspace_values(&subs, &pts, SteeringMode::TeSearch { l: 8 }, &WeightScheme::Unit)?;
    let plain = subspace_values(&subs, &pts, SteeringMode::TePlain, &WeightScheme::Unit)?;
    let (ms, mp) = (search.iter().cloned().fold(0.0, f64::max), plain.iter().cloned().fold(0.0, f64::max));
    println!("{:>6} {:>10} {:>10}", "y", "TE_search", "TE_plain");
    for ((y, s), p) in ys.iter().zip(&search).zip(&plain).step_by(2) {
        println!("{y:>6.2} {:>10.3} {:>10.3}", s / ms, p / mp);
    }
    Ok(())
}
