//! The discrete Abel transform: exact radial profiles of Laplacian powers on
//! homogeneous trees, the round trip, and the decay of a heat profile.

use flowtree::abel::{abel_forward, abel_inverse, e_f_coefficients, e_f_polynomial_exact};
use flowtree::experiment::abel_direct_check;
use flowtree::scalar::ratio;
use flowtree::tree::Backend;
use num::complex::Complex64;

fn main() -> flowtree::Result<()> {
    for q in [2u64, 3] {
        let e = e_f_polynomial_exact(q, &[ratio(0, 1), ratio(0, 1), ratio(1, 1)]);
        let shown: Vec<String> = e.iter().map(|v| format!("{v}")).collect();
        println!("q={q}: radial profile of 𝓛² = [{}]", shown.join(", "));
        assert_eq!(abel_inverse(q, &abel_forward(q, &e)), e);
    }

    let rep = abel_direct_check(3, 6, 6, Backend::Rational)?;
    for row in &rep.rows {
        println!("𝓛^{} on 𝕋₃: {} pairs, {} mismatches", row[0], row[1], row[3]);
    }

    let radial = e_f_coefficients(2, |l| Complex64::new((-4.0 * l).exp(), 0.0), 40, 1e-15, 1 << 12)?;
    for k in [0, 5, 10, 20, 40] {
        println!("heat profile at distance {k}: {:.6e}", radial.e(k).re);
    }
    Ok(())
}
