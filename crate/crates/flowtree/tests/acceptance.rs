//! Acceptance suite: one line per criterion, `criterion N: PASS|FAIL …`.
//! Criteria listed in `BLOCKED` are reported with their measured values but do
//! not set the exit status.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use num::complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowtree::abel::{abel_forward, abel_inverse};
use flowtree::analysis::{
    compressed_spectrum, divergence_probe, imaginary_power_multiplier, level_sum_estimate, log_grid, mh_dyadic_norms,
    riesz_skew_check, sharpness_fit, sobolev_proxy, spectrum_probe, weighted_heat_sweep, QuadratureSpec,
    RieszQuadrature, HEAT_TOL,
};
use flowtree::experiment::{abel_direct_check, transfer_check};
use flowtree::ops::NcPolynomial;
use flowtree::quotient::{check_fiber_masses, perturbation_probe, rationalize_flow, ProbeOperator};
use flowtree::scalar::{ratio, QuadSurd};
use flowtree::special::{central_bump, heat_degree};
use flowtree::tree::{
    chain_fibonacci, chain_first, homogeneous_ball_window, homogeneous_window, path_window, ratio_ball_window, Backend,
    RatioProfile, DEFAULT_VERTEX_CAP,
};
use flowtree::zline::{imaginary_power_closed_form, imaginary_power_kernel, parseval_residual, z_multiplier_kernel};
use flowtree::Result;

const BLOCKED: [u32; 1] = [10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn abel_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let mut pass = true;
    let mut worst_float = 0.0f64;
    let mut pairs = 0.0;
    for q in [2, 3, 4] {
        let exact = abel_direct_check(q, 6, 6, Backend::Rational)?;
        let float = abel_direct_check(q, 6, 6, Backend::Float)?;
        pass &= exact.rows.len() == 7 && float.rows.len() == 7;
        for (e, f) in exact.rows.iter().zip(&float.rows) {
            pass &= e[1] > 0.0 && e[3] == 0.0 && f[2] <= 1e-10;
            worst_float = worst_float.max(f[2]);
            pairs += e[1];
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        pass && secs < 30.0,
        format!("{pairs} pairs exact in rational, float max deviation {worst_float:.2e}, {secs:.1} s"),
    )
}

fn abel_round_trip() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    for q in [2u64, 3, 5, 10] {
        for _ in 0..50 {
            let len = rng.random_range(1..=16);
            let psi: Vec<QuadSurd> = (0..len)
                .map(|_| QuadSurd::rational(ratio(rng.random_range(-50..=50), rng.random_range(1..=30))))
                .collect();
            if abel_forward(q, &abel_inverse(q, &psi)) != psi {
                failures += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(failures == 0 && secs < 5.0, format!("{failures} of 200 sequences differ, {secs:.2} s"))
}

fn z_base_cases() -> Result<Outcome> {
    let k = z_multiplier_kernel(|l| Complex64::new(l, 0.0), 8, 64)?;
    let expected = |n: i64| match n {
        0 => 1.0,
        1 | -1 => -0.5,
        _ => 0.0,
    };
    let dev = (-8..=8).map(|n| (k.get(n) - Complex64::new(expected(n), 0.0)).norm()).fold(0.0, f64::max);
    let parseval = parseval_residual(|l| Complex64::new(central_bump(l), 0.0), 400, 4096)?;
    outcome(dev <= 1e-14 && parseval <= 1e-10, format!("Laplacian kernel deviation {dev:.2e}, Parseval residual {parseval:.2e}"))
}

fn riesz_skew() -> Result<Outcome> {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let up = RieszQuadrature::new(spec.clone())?.degree / 2 + 24;
    let line = path_window(2 * up + 1, up as i64)?;
    let line_set: Vec<usize> = (up - 4..=up + 4).collect();
    let (btree, bo) = ratio_ball_window(&RatioProfile::homogeneous(2), chain_first, 4, up, DEFAULT_VERTEX_CAP)?;
    let (gtree, go) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, up, DEFAULT_VERTEX_CAP)?;
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, tree, set) in [
        ("integers", &line, line_set),
        ("binary", &btree, btree.window.ball(bo, 4)),
        ("golden", &gtree, gtree.window.ball(go, 4)),
    ] {
        let rep = riesz_skew_check(tree, &set, 8, spec.clone())?;
        let dev = rep.meta_f64("max_deviation").unwrap_or(f64::NAN);
        pass &= dev <= 1e-6;
        parts.push(format!("{name} {dev:.2e} ({} pairs)", rep.rows.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 300.0, format!("max deviations {}, {secs:.1} s", parts.join(", ")))
}

fn transference() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (profile, q) in [
        (vec![ratio(1, 2), ratio(1, 2)], 2),
        (vec![ratio(3, 4), ratio(1, 4)], 4),
        (vec![ratio(1, 3), ratio(1, 3), ratio(1, 3)], 3),
    ] {
        let (target, o) =
            ratio_ball_window(&RatioProfile::Rational(profile.clone()), chain_fibonacci, 3, 3, DEFAULT_VERTEX_CAP)?;
        let (rep, valid) = transfer_check(&target, o, q, 20, 4, 11)?;
        let (source, s) = flowtree::quotient::build_submersion_rational(&target, q, DEFAULT_VERTEX_CAP)?;
        let identities = check_fiber_masses(&source, &target, &s)?;
        let mismatches: f64 = rep.rows.iter().map(|r| r[3]).sum();
        let pairs: f64 = rep.rows.iter().map(|r| r[2]).sum();
        pass &= valid && mismatches == 0.0 && rep.rows.iter().all(|r| r[2] > 0.0) && identities > 0;
        let name: Vec<String> = profile.iter().map(|r| r.to_string()).collect();
        parts.push(format!("({}) valid={valid} {mismatches} mismatches over {pairs} pairs", name.join(",")));
    }
    outcome(pass, parts.join("; "))
}

fn rationalization() -> Result<Outcome> {
    let (tree, o) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 5, 8, DEFAULT_VERTEX_CAP)?;
    let qs = [8, 64, 512];
    let mut pass = true;
    let mut errs = Vec::new();
    for &q in &qs {
        let r = rationalize_flow(&tree, q, o)?;
        let bound = (2 - 1) as f64 / q as f64;
        let worst = r.rows.iter().map(|row| row.error).fold(0.0, f64::max);
        pass &= r.q0 == 2 && worst <= bound;
        errs.push(format!("q={q}: {worst:.3e} ≤ {bound:.3e}"));
    }
    let lap2 = NcPolynomial::<f64>::laplacian_polynomial(&[0.0, 0.0, 1.0]);
    let rows = perturbation_probe(&tree, o, &qs, ProbeOperator::Polynomial(&lap2), &tree.window.ball(o, 2))?;
    let devs: Vec<f64> = rows.iter().map(|r| r.max_deviation).collect();
    pass &= devs.windows(2).all(|p| p[1] <= p[0]) && devs[devs.len() - 1] < devs[0];
    outcome(pass, format!("ratio errors {}; kernel deviations {:?}", errs.join(", "), devs))
}

fn heat_scaling() -> Result<Outcome> {
    let start = Instant::now();
    let rep = weighted_heat_sweep(&[2, 3, 5], 1.0, &[1.0, 4.0, 16.0, 64.0])?;
    let heat = rep.column("heat").unwrap_or_default();
    let spread = heat.iter().cloned().fold(0.0, f64::max) / heat.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut pass = spread <= 10.0;
    let mut parts = vec![format!("heat spread ×{spread:.2}")];
    for q in [2, 3, 5] {
        let g = rep.fit(&format!("grad_heat/q={q}")).map(|f| f.slope).unwrap_or(f64::NAN);
        let ga = rep.fit(&format!("heat_grad_adjoint/q={q}")).map(|f| f.slope).unwrap_or(f64::NAN);
        let gg = rep.fit(&format!("grad_heat_grad_adjoint/q={q}")).map(|f| f.slope).unwrap_or(f64::NAN);
        pass &= within(g, -0.5, 0.1) && within(ga, -0.5, 0.1) && within(gg, -1.0, 0.15);
        parts.push(format!("q={q}: ∇ {g:.3}, ∇* {ga:.3}, ∇∇* {gg:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    parts.push(format!("{secs:.0} s"));
    outcome(pass, parts.join("; "))
}

fn level_sums() -> Result<Outcome> {
    let ts = log_grid(1.0, 128.0, 8);
    let up = heat_degree(128.0, HEAT_TOL) + 8;
    let (binary, bo) = homogeneous_ball_window(2, 1, up, DEFAULT_VERTEX_CAP)?;
    let profile = RatioProfile::Rational(vec![ratio(1, 3), ratio(2, 3)]);
    let (skew, so) = ratio_ball_window(&profile, chain_fibonacci, 1, up, DEFAULT_VERTEX_CAP)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, tree, o) in [("binary", &binary, bo), ("ratios 1/3,2/3", &skew, so)] {
        let rep = level_sum_estimate(tree, &tree.window.ball(o, 1), &ts, None)?;
        let row = rep.fit("row_sum").map(|f| f.slope).unwrap_or(f64::NAN);
        let col = rep.fit("column_sum").map(|f| f.slope).unwrap_or(f64::NAN);
        let truncated = rep.column("truncated").unwrap_or_default().iter().any(|t| *t != 0.0);
        pass &= within(row, -1.0, 0.1) && within(col, -1.0, 0.1) && !truncated;
        parts.push(format!("{name}: row {row:.3}, column {col:.3}"));
    }
    outcome(pass, parts.join("; "))
}

fn sharpness() -> Result<Outcome> {
    let rep = sharpness_fit(2, &log_grid(10.0, 40.0, 7))?;
    let slope = rep.fit("functional").map(|f| f.slope).unwrap_or(f64::NAN);
    let sob = sobolev_proxy(&log_grid(10.0, 320.0, 6), &[1.0, 2.0]);
    let s1 = sob.fit("s=1").map(|f| f.slope).unwrap_or(f64::NAN);
    let s2 = sob.fit("s=2").map(|f| f.slope).unwrap_or(f64::NAN);
    let mut shifted = Vec::new();
    for t0 in [5.0, 20.0] {
        let r = sharpness_fit(2, &log_grid(t0, 4.0 * t0, 7))?;
        shifted.push(format!("[{t0},{}]: {:.3}", 4.0 * t0, r.fit("functional").map(|f| f.slope).unwrap_or(f64::NAN)));
    }
    outcome(
        within(slope, 1.5, 0.2) && within(s1, 1.0, 0.2) && within(s2, 2.0, 0.2),
        format!(
            "sharpness slope {slope:.3} (shifted windows {}); Sobolev exponents s=1: {s1:.3}, s=2: {s2:.3}",
            shifted.join(", ")
        ),
    )
}

fn mh_pieces() -> Result<Outcome> {
    let levels: Vec<u32> = (0..=6).collect();
    let rep = mh_dyadic_norms(2, imaginary_power_multiplier(1.0), &levels, 1.0)?;
    let slope = rep.fit("gradient_sum").map(|f| f.slope).unwrap_or(f64::NAN);
    let g = rep.column("gradient_sum").unwrap_or_default();
    let last = (g[g.len() - 1] / g[g.len() - 2]).log2();
    outcome(within(slope, -0.5, 0.1), format!("gradient-sum slope {slope:.3} (local slope at ℓ=6: {last:.3})"))
}

fn imaginary_powers() -> Result<Outcome> {
    let k = imaginary_power_kernel(1.0, 50)?;
    let band: Vec<f64> = (10..=200).map(|n| imaginary_power_closed_form(1.0, n).norm() * n as f64).collect();
    let ratio = band.iter().cloned().fold(0.0, f64::max) / band.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        ratio <= 1.2 && k.max_discrepancy <= 1e-8,
        format!("|k(n)|·n band ×{ratio:.4}, quadrature vs Gamma {:.2e}", k.max_discrepancy),
    )
}

fn spectrum() -> Result<Outcome> {
    let path = path_window(205, 0)?;
    let rep = spectrum_probe(&path, 1, &[0.0, PI / 3.0, PI], &[10, 20, 50, 100, 200])?;
    let slopes: Vec<f64> = rep.fits.values().map(|f| f.slope).collect();
    let mut pass = slopes.len() == 3 && slopes.iter().all(|s| within(*s, -0.5, 0.1));
    let (golden, _) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 6, 8, DEFAULT_VERTEX_CAP)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sizes = Vec::new();
    for tree in [path_window(500, 0)?, homogeneous_window(2, 0, 7, 20, DEFAULT_VERTEX_CAP)?, golden] {
        let ev = compressed_spectrum(&tree)?;
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
        sizes.push(tree.window.len());
    }
    pass &= lo >= -1e-10 && hi <= 2.0 + 1e-10;
    outcome(pass, format!("residual exponents {slopes:.3?}; eigenvalues in [{lo:.3e}, {hi:.6}] for windows {sizes:?}"))
}

fn divergence() -> Result<Outcome> {
    let tree = path_window(130, 0)?;
    let rep = divergence_probe(&tree, 1, &[16, 32, 64, 128])?;
    let sums = rep.column("partial_sum").unwrap_or_default();
    let inc: Vec<f64> = sums.windows(2).map(|p| p[1] - p[0]).collect();
    let pass = inc.len() == 3 && inc.iter().all(|d| within(*d, LN_2, 0.25 * LN_2));
    outcome(pass, format!("increments {:.4?} against log 2 = {LN_2:.4}", inc))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Result<Outcome>)> = vec![
        (1, "Abel and direct kernels agree", abel_oracle),
        (2, "Abel round trip", abel_round_trip),
        (3, "integer base cases", z_base_cases),
        (4, "Riesz skew identity", riesz_skew),
        (5, "transference exactness", transference),
        (6, "rationalization bounds", rationalization),
        (7, "heat-estimate scaling", heat_scaling),
        (8, "level-sum decay", level_sums),
        (9, "sharpness exponent", sharpness),
        (10, "dyadic multiplier pieces", mh_pieces),
        (11, "imaginary powers", imaginary_powers),
        (12, "spectrum probe", spectrum),
        (13, "divergence probe", divergence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str()) || *p == n.to_string()) {
            continue;
        }
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let blocked = BLOCKED.contains(&n);
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if blocked && !pass { " [known blocker, excluded from exit status]" } else { "" };
        println!("criterion {n}: {tag} {name}: {detail}{note}");
        if !pass && !blocked {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

