//! Exact kernel columns of Laplacian polynomials and a Chebyshev heat column on
//! the golden-ratio flow tree.

use flowtree::cheb::{kernel_column_general, ChebModel};
use flowtree::ops::{column_mass_exact, kernel_column_poly, NcPolynomial};
use flowtree::scalar::ratio;
use flowtree::tree::{homogeneous_ball_window, ratio_ball_window, chain_fibonacci, RatioProfile, DEFAULT_VERTEX_CAP};

fn main() -> flowtree::Result<()> {
    let (tree, o) = homogeneous_ball_window(3, 6, 6, DEFAULT_VERTEX_CAP)?;
    let lap2 = NcPolynomial::laplacian_polynomial(&[ratio(0, 1), ratio(0, 1), ratio(1, 1)]);
    let col = kernel_column_poly(&tree, &lap2, o)?;
    println!("𝓛² on 𝕋₃: {} nonzero entries, column mass {}", col.entries.len(), column_mass_exact(&tree, &col)?);
    for (x, v) in col.entries.iter().take(6) {
        println!("  K({}, o) = {v}", tree.window.label(*x));
    }

    let (golden, go) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 12, 16, DEFAULT_VERTEX_CAP)?;
    let model = ChebModel::heat(1.0, 12);
    let heat = kernel_column_general(&golden, &model, go);
    let m = golden.masses_f64();
    let mass: f64 = heat.entries.iter().map(|(x, v)| v.re * m[*x]).sum();
    println!(
        "e^{{-𝓛}} on the golden tree: degree {}, {} entries, pairing with 1 = {mass:.12}, certificate {:.2e}",
        model.degree(),
        heat.entries.len(),
        heat.err_bound
    );
    Ok(())
}
