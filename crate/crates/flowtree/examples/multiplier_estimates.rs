//! Dyadic pieces of an oscillating multiplier, the sharpness functional of the
//! Schrödinger-type multipliers and their Sobolev norms on the binary tree.

use flowtree::analysis::{imaginary_power_multiplier, log_grid, mh_dyadic_norms, sharpness_fit, sobolev_proxy};

fn main() -> flowtree::Result<()> {
    let levels: Vec<u32> = (0..=6).collect();
    let rep = mh_dyadic_norms(2, imaginary_power_multiplier(1.0), &levels, 1.0)?;
    for row in &rep.rows {
        println!("level {:>2}: weighted {:.4}  gradient {:.4}  (kmax {})", row[0], row[1], row[2], row[3]);
    }
    println!("gradient-sum slope (log2 vs level): {:.3}", rep.fits["gradient_sum"].slope);

    let rep = sharpness_fit(2, &log_grid(10.0, 40.0, 7))?;
    for row in &rep.rows {
        println!("t={:6.2}: functional {:.4}  shell column sum {:.4}  full column sum {:.4}", row[0], row[1], row[2], row[3]);
    }
    println!("sharpness slope: {:.3}", rep.fits["functional"].slope);

    let rep = sobolev_proxy(&log_grid(10.0, 320.0, 6), &[1.0, 2.0]);
    for (k, f) in &rep.fits {
        println!("Sobolev proxy {k}: slope {:.3}", f.slope);
    }
    Ok(())
}
