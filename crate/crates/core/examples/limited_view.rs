//! Γ2 imaged from the full circle and from the upper aperture (π/6, 5π/6).
//!
//! ```bash
//! cargo run --release --example limited_view
//! ```

use crack_imaging::cli::config::preset_from_str;
use crack_imaging::cli::experiment::run_pipeline;

fn main() -> crack_imaging::Result<()> {
    for p in ["Γ2,TM", "Γ2,TM,upper"] {
        let cfg = preset_from_str(p)?;
        let out = run_pipeline(&cfg)?;
        let Some(m) = out.metrics else { continue };
        let pct: Vec<String> = m.endpoint_percentiles.iter().map(|v| format!("{:.1}%", 100.0 * v)).collect();
        println!(
            "{p:<12} aperture ({:.3}, {:.3}) N = {:>2}: contrast {:>6.2}, argmax {:.3} from Γ2, endpoints at {}",
            cfg.aperture.alpha,
            cfg.aperture.beta,
            cfg.aperture.n,
            m.contrast,
            m.argmax_distance,
            pct.join(" and ")
        );
    }
    Ok(())
}
