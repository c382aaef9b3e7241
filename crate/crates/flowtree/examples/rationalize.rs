//! Rational approximations of the golden-ratio flow and the resulting change in
//! kernel columns as the denominator grows.

use flowtree::ops::NcPolynomial;
use flowtree::quotient::{perturbation_probe, rationalize_flow, ProbeOperator};
use flowtree::tree::{chain_fibonacci, ratio_ball_window, RatioProfile, DEFAULT_VERTEX_CAP};

fn main() -> flowtree::Result<()> {
    let (tree, o) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 5, 8, DEFAULT_VERTEX_CAP)?;
    let grid = [8, 64, 512];
    for &q in &grid {
        let r = rationalize_flow(&tree, q, o)?;
        println!(
            "q={q:>4}: off-anchor error {:.3e}, anchor error {:.3e}, bound {:.3e}",
            r.max_off_anchor_error,
            r.max_anchor_error,
            1.0 / q as f64
        );
    }
    let lap2 = NcPolynomial::<f64>::laplacian_polynomial(&[0.0, 0.0, 1.0]);
    for row in perturbation_probe(&tree, o, &grid, ProbeOperator::Polynomial(&lap2), &tree.window.ball(o, 2))? {
        println!("q={:>4}: 𝓛² column deviation {:.4e} over {} pairs", row.q, row.max_deviation, row.pairs);
    }
    Ok(())
}
