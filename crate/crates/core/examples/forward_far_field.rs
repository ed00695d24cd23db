//! Far-field patterns of the catalog cracks for both boundary conditions,
//! with reciprocity and energy balance as sanity checks.
//!
//! ```bash
//! cargo run --release --example forward_far_field
//! ```

use std::f64::consts::PI;

use crack_imaging::forward::{solve_density, BoundaryCondition, NystromConfig, PlaneWave, Solver};
use crack_imaging::geometry::catalog;
use crack_imaging::Vec2;

fn dir(a: f64) -> Vec2 {
    Vec2::new(a.cos(), a.sin())
}

fn main() -> crack_imaging::Result<()> {
    let k = 2.0 * PI / 0.5;
    let theta = dir(-PI / 2.0);
    let cfg = NystromConfig::default();

    for name in ["Γ1", "Γ2", "Γ3", "Γ4"] {
        let crack = catalog(name)?;
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let sol = solve_density(&crack, PlaneWave::new(theta, k)?, bc, &cfg)?;
            // Optical theorem: ∫|u∞|² = −2√(2π/k) Re(e^{iπ/4} u∞(θ))
            let m = 720;
            let mut energy = 0.0;
            for i in 0..m {
                energy += sol.far_field(dir(2.0 * PI * i as f64 / m as f64))?.norm_sqr();
            }
            energy *= 2.0 * PI / m as f64;
            let fwd = sol.far_field(theta)?;
            let extinction = -2.0 * (2.0 * PI / k).sqrt() * (fwd * crack_imaging::C64::from_polar(1.0, PI / 4.0)).re;
            let back = sol.far_field(-theta)?;
            println!(
                "{name} {:<9} |u(-θ)| = {:.4}  energy {energy:.6}  extinction {extinction:.6}",
                bc.label(),
                back.norm()
            );
        }
    }

    let s = Solver::new(&catalog("Γ2")?, k, BoundaryCondition::Dirichlet, &cfg)?;
    let (xh, th) = (dir(0.3), dir(2.1));
    let a = s.solve(th)?.far_field(xh)?;
    let b = s.solve(-xh)?.far_field(-th)?;
    println!("reciprocity on Γ2: |u(x̂,θ) - u(-θ,-x̂)| = {:.2e}", (a - b).norm());
    Ok(())
}
