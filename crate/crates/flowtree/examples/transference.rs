//! Flow submersions from homogeneous trees onto rational flow trees, and exact
//! transference of polynomial kernels through fiber averages.

use flowtree::experiment::transfer_check;
use flowtree::quotient::{build_submersion_rational, check_fiber_masses, validate_submersion};
use flowtree::scalar::ratio;
use flowtree::tree::{chain_fibonacci, ratio_ball_window, RatioProfile, DEFAULT_VERTEX_CAP};

fn main() -> flowtree::Result<()> {
    for (ratios, q) in [
        (vec![ratio(3, 4), ratio(1, 4)], 4),
        (vec![ratio(1, 3), ratio(1, 3), ratio(1, 3)], 3),
        (vec![ratio(1, 6), ratio(1, 3), ratio(1, 2)], 6),
    ] {
        let names: Vec<String> = ratios.iter().map(|r| r.to_string()).collect();
        let (target, o) = ratio_ball_window(&RatioProfile::Rational(ratios), chain_fibonacci, 3, 3, DEFAULT_VERTEX_CAP)?;
        let (source, s) = build_submersion_rational(&target, q, DEFAULT_VERTEX_CAP)?;
        let report = validate_submersion(&source, &target, &s);
        let identities = check_fiber_masses(&source, &target, &s)?;
        let (rep, _) = transfer_check(&target, o, q, 10, 4, 5)?;
        let mismatches: f64 = rep.rows.iter().map(|r| r[3]).sum();
        println!(
            "ratios ({}) from 𝕋_{q}: {} source vertices, valid={}, {identities} fiber identities, {mismatches} kernel mismatches",
            names.join(","),
            source.window.len(),
            report.is_valid()
        );
    }
    Ok(())
}
