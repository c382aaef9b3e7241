//! Weighted L¹ sweep of the heat semigroup and its gradients on homogeneous trees,
//! followed by the level-sum decay on the binary tree.

use flowtree::analysis::{level_sum_estimate, weighted_heat_sweep, HEAT_TOL};
use flowtree::special::heat_degree;
use flowtree::tree::{homogeneous_ball_window, DEFAULT_VERTEX_CAP};

fn main() -> flowtree::Result<()> {
    let t_grid = [1.0, 4.0, 16.0, 64.0];
    let rep = weighted_heat_sweep(&[2, 3, 5], 1.0, &t_grid)?;
    println!("{}", rep.columns.join("\t"));
    for row in &rep.rows {
        println!("{}", row.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>().join("\t"));
    }
    for (k, f) in &rep.fits {
        println!("slope {k}: {:.3} (residual {:.2e})", f.slope, f.residual);
    }

    let levels: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
    let (tree, o) = homogeneous_ball_window(2, 1, heat_degree(128.0, HEAT_TOL) + 8, DEFAULT_VERTEX_CAP)?;
    let rep = level_sum_estimate(&tree, &[o], &levels, None)?;
    for row in &rep.rows {
        println!("t={:>5}  row={:.5}  column={:.5}", row[0], row[1], row[2]);
    }
    for (k, f) in &rep.fits {
        println!("level-sum slope {k}: {:.3}", f.slope);
    }
    Ok(())
}
