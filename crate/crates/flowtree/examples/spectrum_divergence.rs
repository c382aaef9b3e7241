//! Approximate eigenfunctions of the averaging operator, spectra of window
//! compressions, and the logarithmic divergence of the skew Riesz kernel.

use flowtree::analysis::{compressed_spectrum, divergence_probe, spectrum_probe};
use flowtree::tree::{homogeneous_window, path_window, DEFAULT_VERTEX_CAP};
use std::f64::consts::PI;

fn main() -> flowtree::Result<()> {
    let path = path_window(205, 0)?;
    let rep = spectrum_probe(&path, 1, &[0.0, PI / 3.0, PI], &[10, 20, 50, 100, 200])?;
    for (k, f) in &rep.fits {
        println!("residual exponent {k}: {:.4}", f.slope);
    }
    let tree = homogeneous_window(2, 0, 7, 20, DEFAULT_VERTEX_CAP)?;
    let ev = compressed_spectrum(&tree)?;
    println!("compressed spectrum on {} vertices: [{:.3e}, {:.6}]", tree.window.len(), ev[0], ev[ev.len() - 1]);

    let rep = divergence_probe(&path_window(130, 0)?, 1, &[16, 32, 64, 128])?;
    for row in &rep.rows {
        println!("D={:>3}: partial sum {:.5}, harmonic {:.5}", row[0], row[1], row[2]);
    }
    Ok(())
}
