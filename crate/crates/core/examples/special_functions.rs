//! Bessel and Hankel functions, and the Jacobi–Anger expansion that ties
//! plane waves to them.
//!
//! ```bash
//! cargo run --release --example special_functions
//! ```

use crack_imaging::specfun::{bessel_j, default_truncation, hankel1, jacobi_anger_partial};
use crack_imaging::C64;

fn main() -> crack_imaging::Result<()> {
    println!("{:>6} {:>14} {:>14} {:>26}", "x", "J0(x)", "J1(x)", "H0(1)(x)");
    for x in [0.1, 1.0, 2.404_825_557_695_773, 10.0, 50.0] {
        let h = hankel1(0, x)?;
        println!("{x:>6.3} {:>14.10} {:>14.10} {:>12.8} {:+12.8}i", bessel_j(0, x)?, bessel_j(1, x)?, h.re, h.im);
    }

    // e^{iz cos φ} = Σ iⁿ J_n(z) e^{inφ}
    let (z, phi) = (5.0f64, 1.0f64);
    let exact = C64::from_polar(1.0, z * phi.cos());
    for l in [4, 8, 12, default_truncation(z)] {
        let err = (jacobi_anger_partial(z, phi, l)? - exact).norm();
        println!("Jacobi-Anger, L = {l:>2}: error {err:.3e}");
    }
    Ok(())
}
