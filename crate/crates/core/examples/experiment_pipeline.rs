//! Config-driven run: TOML round trip, artifacts, manifest verification and
//! PGM rendering, all inside a temporary directory.
//!
//! ```bash
//! cargo run --release --example experiment_pipeline
//! ```

use crack_imaging::cli::config::{preset, ExperimentConfig, Polarization};
use crack_imaging::cli::experiment::{run_experiment, Stages};
use crack_imaging::cli::manifest::verify_manifest;
use crack_imaging::cli::render::render_map;

fn main() -> crack_imaging::Result<()> {
    let dir = std::env::temp_dir().join(format!("crack-imaging-example-{}", std::process::id()));
    let mut cfg = preset("Γ1", Polarization::Tm)?;
    cfg.frequencies.count = 4;
    cfg.grid.h = 0.04;
    cfg.output = dir.to_string_lossy().into_owned();

    let text = cfg.to_toml()?;
    assert_eq!(ExperimentConfig::from_toml(&text)?.to_toml()?, text);
    println!("--- config ---\n{text}");

    let man = run_experiment(&cfg, Stages::Image)?;
    for (stage, secs) in &man.timings {
        println!("{stage:<8} {secs:.3}s");
    }
    println!("{} artifacts verified", verify_manifest(&dir.join("manifest.json"))?);
    print!("{}", std::fs::read_to_string(dir.join("metrics.txt"))?);

    render_map(&dir.join("map.csv"), &dir.join("map.pgm"))?;
    println!("map.pgm: {} bytes in {}", std::fs::metadata(dir.join("map.pgm"))?.len(), dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
