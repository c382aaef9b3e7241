//! Dyadic multiplier pieces, the sharpness functional and Sobolev norms of the
//! Schrödinger-type multipliers, all on homogeneous trees through the radial route.

use super::{fit_line, fit_loglog, EstimateReport};
use crate::abel::{e_f_coefficients, gradient_column_mass, schrodinger_multiplier, sphere_mass_factor, tilde_e_scaled};
use crate::error::{Error, Result};
use crate::special::dyadic_bump;
use num::complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

/// A bounded multiplier on `[0, 2]`.
pub type Multiplier = std::sync::Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// `λ ↦ λ^{iα}` on `λ > 0` (zero at the origin).
pub fn imaginary_power_multiplier(alpha: f64) -> Multiplier {
    std::sync::Arc::new(move |l: f64| {
        if l <= 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let ph = alpha * l.ln();
            Complex64::new(ph.cos(), ph.sin())
        }
    })
}

/// The constant multiplier 1.
pub fn unit_multiplier() -> Multiplier {
    std::sync::Arc::new(|_| Complex64::new(1.0, 0.0))
}

/// Per-level measurement of one dyadic piece.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DyadicPiece {
    pub level: u32,
    /// `Σ_x (1 + d/2^{ℓ/2})^ε |K(x,y)| m(x)`.
    pub weighted: f64,
    /// `Σ_x |∇_y K(x,y)| m(x)`.
    pub gradient: f64,
    pub kmax: usize,
}

/// Mass weights of the pairs `(d, r)` with `r = ℓ(x) − ℓ(y)` on `𝕋_q`: the total
/// mass of the vertices at distance `d` and level offset `r`, divided by `m(y)` and
/// multiplied by `q^{−d/2} q^{−r/2}` so that it pairs with scaled radial values.
fn pair_weight(q: f64, d: usize, r: i64) -> f64 {
    let d = d as i64;
    if r.abs() > d || (d - r.abs()) % 2 != 0 {
        0.0
    } else if r.abs() == d {
        1.0
    } else {
        (q - 1.0) / q
    }
}

/// Weighted and gradient column sums of `G(𝓛_q)` from scaled radial data `Ê`.
fn radial_piece_sums(q: u64, scaled: &[Complex64], level: u32, epsilon: f64) -> (f64, f64, f64) {
    let qf = q as f64;
    let n = scaled.len();
    let scale = 2f64.powf(level as f64 / 2.0);
    let mut weighted = 0.0;
    let mut gradient = 0.0;
    let mut last: f64 = 0.0;
    for d in 0..n.saturating_sub(1) {
        let e = scaled[d];
        let w = (1.0 + d as f64 / scale).powf(epsilon);
        let shell = w * e.norm() * sphere_mass_factor(q, d);
        weighted += shell;
        let mut g_shell = 0.0;
        for r in (-(d as i64)..=d as i64).step_by(2) {
            let nu = pair_weight(qf, d, r);
            if nu == 0.0 {
                continue;
            }
            let diff = if r == -(d as i64) { e - scaled[d + 1] / qf } else { e - scaled[d - 1] };
            g_shell += nu * diff.norm();
        }
        gradient += g_shell;
        if d + 8 >= n {
            last = last.max(shell + g_shell);
        }
    }
    (weighted, gradient, last)
}

/// Weighted and gradient sums of the dyadic pieces `F(𝓛)φ(2^ℓ𝓛)` on `𝕋_q`, the
/// gradient taken in the second variable, with the slope of `log₂` of the
/// gradient sums against `ℓ`.
pub fn mh_dyadic_norms(q: u64, f: Multiplier, levels: &[u32], epsilon: f64) -> Result<EstimateReport> {
    if q < 2 {
        return Err(Error::InvalidArgument("the radial route needs q ≥ 2".into()));
    }
    let pieces: Vec<Result<DyadicPiece>> = levels
        .par_iter()
        .map(|&level| {
            let s = 2f64.powi(level as i32);
            let g = |l: f64| f(l) * dyadic_bump(s * l);
            let mut kmax = 200 + (60.0 * s.sqrt()) as usize;
            loop {
                let grid = (8 * (kmax + 200)).next_power_of_two().max(1 << 15);
                let radial = e_f_coefficients(q, g, kmax, 1e-15, grid)?;
                let (weighted, gradient, last) = radial_piece_sums(q, &radial.scaled, level, epsilon);
                if last <= 1e-9 * (weighted + gradient) {
                    return Ok(DyadicPiece { level, weighted, gradient, kmax });
                }
                kmax *= 2;
                if kmax > 1 << 15 {
                    return Err(Error::Accuracy("dyadic piece does not decay within the radial range".into()));
                }
            }
        })
        .collect();
    let mut rep = EstimateReport::new("mh-norms", &["level", "weighted_sum", "gradient_sum", "kmax"]);
    for p in pieces {
        let p = p?;
        rep.push(vec![p.level as f64, p.weighted, p.gradient, p.kmax as f64]);
    }
    let ls = rep.column("level").unwrap_or_default();
    let gs: Vec<f64> = rep.column("gradient_sum").unwrap_or_default().iter().map(|g| g.log2()).collect();
    rep.fits.insert("gradient_sum".into(), fit_line(&ls, &gs));
    let ws: Vec<f64> = rep.column("weighted_sum").unwrap_or_default().iter().map(|g| g.log2()).collect();
    rep.fits.insert("weighted_sum".into(), fit_line(&ls, &ws));
    rep.meta("q", q);
    rep.meta("epsilon", epsilon);
    rep.meta("partition_of_unity_max", partition_of_unity_max(levels.iter().copied().max().unwrap_or(0) + 4));
    rep.meta("fit_regressor", "level (log2 scale)");
    Ok(rep)
}

/// `max_λ Σ_{ℓ ≤ L} φ(2^ℓ λ)` on a fine grid of `(0, 2]`.
pub fn partition_of_unity_max(levels: u32) -> f64 {
    (1..=20000)
        .map(|i| {
            let l = 2.0 * i as f64 / 20000.0;
            (0..=levels).map(|k| dyadic_bump(2f64.powi(k as i32) * l)).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Sharpness functional `Σ_{t/4 ≤ k+1 ≤ t/2} |Ẽ_{F_t}(k)| (k+1) q^{k/2}` for
/// `F_t(λ) = e^{itλ}χ₀(λ)`, together with the subset of the weighted column sum
/// of `F_t(𝓛_q)∇` over the same shells and the full column sum.
pub fn sharpness_values(q: u64, t: f64) -> Result<(f64, f64, f64)> {
    let kmax = (2.0 * t) as usize + 40;
    let grid = (16 * kmax).next_power_of_two().max(1 << 13);
    let scaled = tilde_e_scaled(q, schrodinger_multiplier(t), kmax, grid)?;
    let qf = q as f64;
    let mut functional = 0.0;
    let mut subset = 0.0;
    for (k, v) in scaled.iter().enumerate() {
        let kk = (k + 1) as f64;
        if kk >= t / 4.0 && kk <= t / 2.0 {
            functional += v.norm() * kk;
            let mass = if k == 0 { 1.0 } else { 1.0 + (k as f64 - 1.0) * (qf - 1.0) / qf };
            subset += v.norm() * mass;
        }
    }
    let radial = e_f_coefficients(q, schrodinger_multiplier(t), 4 * kmax, 1e-15, grid.max(1 << 14))?;
    let (not_below, below) = gradient_column_mass(q, &radial.scaled);
    Ok((functional, subset, not_below + below))
}

/// Sharpness functional over a grid of times with the log-log slope against `t`.
pub fn sharpness_fit(q: u64, t_grid: &[f64]) -> Result<EstimateReport> {
    let rows: Vec<Result<Vec<f64>>> = t_grid
        .par_iter()
        .map(|&t| {
            let (f, s, full) = sharpness_values(q, t)?;
            Ok(vec![t, f, s, full])
        })
        .collect();
    let mut rep = EstimateReport::new("sharpness", &["t", "functional", "shell_column_sum", "full_column_sum"]);
    for r in rows {
        rep.push(r?);
    }
    let ts = rep.column("t").unwrap_or_default();
    rep.fits.insert("functional".into(), fit_loglog(&ts, &rep.column("functional").unwrap_or_default()));
    rep.meta("q", q);
    rep.meta("fit_regressor", "log t");
    Ok(rep)
}

/// Numerical Sobolev norm `(∫ (1+ξ²)^s |F̂(ξ)|² dξ/2π)^{1/2}` of a function
/// supported in `[−half_width, half_width]`, by FFT of samples.
pub fn sobolev_norm(f: impl Fn(f64) -> Complex64, s: f64, half_width: f64, samples: usize) -> f64 {
    let period = 4.0 * half_width;
    let h = period / samples as f64;
    let mut buf: Vec<Complex64> = (0..samples)
        .map(|j| {
            let x = -period / 2.0 + j as f64 * h;
            f(x)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(samples).process(&mut buf);
    let mut acc = 0.0;
    for (j, v) in buf.iter().enumerate() {
        let k = if j <= samples / 2 { j as f64 } else { j as f64 - samples as f64 };
        let xi = 2.0 * std::f64::consts::PI * k / period;
        acc += (1.0 + xi * xi).powf(s) * (v * h).norm_sqr();
    }
    (acc / period).sqrt()
}

/// Sobolev norms of `F_t = e^{itλ}χ₀(λ)` for each `t` and `s`, with slopes of the
/// log-norms against `log(1+t)`.
pub fn sobolev_proxy(t_grid: &[f64], s_grid: &[f64]) -> EstimateReport {
    let mut cols = vec!["t".to_string()];
    cols.extend(s_grid.iter().map(|s| format!("s={s}")));
    let col_refs: Vec<&str> = cols.iter().map(|c| c.as_str()).collect();
    let mut rep = EstimateReport::new("sobolev-proxy", &col_refs);
    for &t in t_grid {
        let f = schrodinger_multiplier(t);
        let samples = ((64.0 * t) as usize).next_power_of_two().max(1 << 14);
        let mut row = vec![t];
        for &s in s_grid {
            row.push(sobolev_norm(&f, s, 0.5, samples));
        }
        rep.push(row);
    }
    let lx: Vec<f64> = t_grid.iter().map(|t| (1.0 + t).ln()).collect();
    for c in &cols[1..] {
        let ly: Vec<f64> = rep.column(c).unwrap_or_default().iter().map(|v| v.ln()).collect();
        rep.fits.insert(c.clone(), fit_line(&lx, &ly));
    }
    rep.meta("fit_regressor", "log(1+t)");
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_bounded() {
        let m = partition_of_unity_max(10);
        assert!(m <= 1.0 + 1e-12, "{m}");
        assert!(m >= 1.0 - 1e-12);
    }

    #[test]
    fn sobolev_norm_of_smooth_bump_is_stable() {
        let f = schrodinger_multiplier(0.0);
        let a = sobolev_norm(&f, 1.0, 0.5, 1 << 12);
        let b = sobolev_norm(&f, 1.0, 0.5, 1 << 14);
        assert!((a - b).abs() < 1e-9 * b);
        let l2 = sobolev_norm(&f, 0.0, 0.5, 1 << 14);
        let direct: f64 = (0..100000).map(|i| -0.5 + (i as f64 + 0.5) / 100000.0).map(|x| f(x).norm_sqr()).sum::<f64>() / 100000.0;
        assert!((l2 * l2 - direct).abs() < 1e-6);
    }

    #[test]
    fn sharpness_shell_sum_below_full_sum() {
        let (f, s, full) = sharpness_values(2, 16.0).unwrap();
        assert!(s <= full);
        assert!((f / s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn unit_multiplier_pieces_are_finite() {
        let rep = mh_dyadic_norms(2, unit_multiplier(), &[0, 1], 1.0).unwrap();
        assert!(rep.rows.iter().all(|r| r[1].is_finite() && r[2].is_finite()));
    }
}
