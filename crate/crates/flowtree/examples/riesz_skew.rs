//! Quadrature Riesz kernels against the closed-form skew part on the integers,
//! the binary tree and the golden-ratio flow tree.

use flowtree::analysis::{riesz_skew_check, QuadratureSpec, RieszQuadrature};
use flowtree::tree::{chain_fibonacci, path_window, ratio_ball_window, RatioProfile, DEFAULT_VERTEX_CAP};
use std::time::Instant;

fn main() -> flowtree::Result<()> {
    let spec = QuadratureSpec::default();
    let degree = RieszQuadrature::new(spec.clone())?.degree;
    let up = degree / 2 + 24;
    println!("Chebyshev degree at T = {}: {degree}", spec.t_cut);

    let line = path_window(2 * up + 1, up as i64)?;
    let centre = up;
    let line_set: Vec<usize> = (centre - 4..=centre + 4).collect();

    let binary = RatioProfile::homogeneous(2);
    let (btree, bo) = ratio_ball_window(&binary, flowtree::tree::chain_first, 4, up, DEFAULT_VERTEX_CAP)?;
    let (gtree, go) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, up, DEFAULT_VERTEX_CAP)?;

    for (name, tree, set) in [
        ("integers", &line, line_set),
        ("binary", &btree, btree.window.ball(bo, 4)),
        ("golden", &gtree, gtree.window.ball(go, 4)),
    ] {
        let start = Instant::now();
        let rep = riesz_skew_check(tree, &set, 8, spec.clone())?;
        println!(
            "{name:>9}: pairs={} max deviation={:.3e} max error estimate={:.3e} ({:.1?})",
            rep.rows.len(),
            rep.meta_f64("max_deviation").unwrap_or(f64::NAN),
            rep.meta_f64("max_error_estimate").unwrap_or(f64::NAN),
            start.elapsed()
        );
    }
    Ok(())
}
