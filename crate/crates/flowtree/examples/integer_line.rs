//! Multiplier kernels on the integers: the Laplacian base case, Parseval, and the
//! imaginary powers against their Gamma-function closed form.

use flowtree::special::central_bump;
use flowtree::zline::{imaginary_power_kernel, parseval_residual, z_multiplier_kernel};
use num::complex::Complex64;

fn main() -> flowtree::Result<()> {
    let k = z_multiplier_kernel(|l| Complex64::new(l, 0.0), 3, 64)?;
    for n in -3..=3 {
        println!("Laplacian kernel k({n}) = {:.3}", k.get(n).re);
    }
    let r = parseval_residual(|l| Complex64::new(central_bump(l), 0.0), 400, 4096)?;
    println!("Parseval residual for a smooth bump: {r:.2e}");

    let ip = imaginary_power_kernel(1.0, 200)?;
    println!("λ^i kernel: quadrature against closed form {:.2e}", ip.max_discrepancy);
    for (n, v) in ip.decay_profile(10, 200).into_iter().step_by(38) {
        println!("  |k({n})|·n = {v:.6}");
    }
    Ok(())
}
