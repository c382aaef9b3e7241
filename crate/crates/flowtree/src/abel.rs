//! The discrete Abel transform linking even kernels on `ℤ` with radial kernels
//! on homogeneous trees, and the closed-form radial kernel calculus on `𝕋_q`.

use std::f64::consts::PI;
use std::io::Write;

use num::complex::Complex64;
use num::{BigInt, BigRational, Zero};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::QuadSurd;
use crate::special::plateau_bump;
use crate::zline::{z_grad_multiplier_kernel, z_polynomial_kernel_exact, ALIASING_TOL};

/// Number of vertices `x` with `d(x, y) = d` and `ℓ(x) − ℓ(y) = r` in `𝕋_q`.
pub fn sphere_count(q: u64, d: u64, r: i64) -> u128 {
    let q = q as u128;
    let a = r.unsigned_abs();
    if a > d || (d - a) % 2 == 1 {
        return 0;
    }
    let exp = ((d as i64 - r) / 2) as u32;
    if a == d {
        q.saturating_pow(exp)
    } else {
        (q - 1).saturating_mul(q.saturating_pow(exp - 1))
    }
}

/// `Σ_r sphere_count(q, d, r) q^{r/2}` divided by `q^{d/2}`.
pub fn sphere_mass_factor(q: u64, d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let q = q as f64;
    2.0 + (d as f64 - 1.0) * (1.0 - 1.0 / q)
}

/// Forward Abel transform `𝓙_q(φ)(j) = q^{j/2}[φ(j) + ((q−1)/q) Σ_{k≥1} q^k φ(j+2k)]`, exact.
pub fn abel_forward(q: u64, phi: &[QuadSurd]) -> Vec<QuadSurd> {
    let qr = BigRational::from_integer(BigInt::from(q));
    let factor = QuadSurd::rational((&qr - BigRational::from_integer(1.into())) / &qr);
    (0..phi.len())
        .map(|j| {
            let mut tail = QuadSurd::zero();
            let mut k = 1;
            while j + 2 * k < phi.len() {
                tail = tail + QuadSurd::half_power(q, 2 * k as i64) * phi[j + 2 * k].clone();
                k += 1;
            }
            QuadSurd::half_power(q, j as i64) * (phi[j].clone() + factor.clone() * tail)
        })
        .collect()
}

/// Inverse Abel transform `φ(k) = Σ_{j≥0} q^{−(k+2j)/2} (ψ(k+2j) − ψ(k+2j+2))` of an even
/// finitely supported sequence given on `n ≥ 0`, exact.
pub fn abel_inverse(q: u64, psi: &[QuadSurd]) -> Vec<QuadSurd> {
    let at = |n: usize| psi.get(n).cloned().unwrap_or_else(QuadSurd::zero);
    (0..psi.len())
        .map(|k| {
            let mut acc = QuadSurd::zero();
            let mut j = 0;
            while k + 2 * j < psi.len() {
                let diff = at(k + 2 * j) - at(k + 2 * j + 2);
                acc = acc + QuadSurd::half_power(q, -((k + 2 * j) as i64)) * diff;
                j += 1;
            }
            acc
        })
        .collect()
}

/// Exact radial profile `E_F` of `F(𝓛_q)` for a polynomial `F(λ) = Σ a_j λ^j`.
pub fn e_f_polynomial_exact(q: u64, coeffs: &[BigRational]) -> Vec<QuadSurd> {
    let k: Vec<QuadSurd> = z_polynomial_kernel_exact(coeffs).into_iter().map(QuadSurd::rational).collect();
    abel_inverse(q, &k)
}

/// Exact kernel `q^{−(ℓx+ℓy)/2} E(d)` of a radial operator on `𝕋_q`.
pub fn homog_kernel_value_exact(q: u64, e: &[QuadSurd], lx: i64, ly: i64, d: usize) -> QuadSurd {
    let ed = e.get(d).cloned().unwrap_or_else(QuadSurd::zero);
    QuadSurd::half_power(q, -(lx + ly)) * ed
}

/// Radial profile with values stored as `Ê(k) = q^{k/2} E(k)` to avoid underflow.
#[derive(Clone, Debug, Serialize)]
pub struct RadialKernel {
    pub q: u64,
    pub scaled: Vec<Complex64>,
    /// Bound on `|Ê(k) − stored|` for every `k`.
    pub tail_bound: f64,
    /// `sup_n |∇̃k(n)|` of the underlying `ℤ` kernel.
    pub grad_sup: f64,
}

impl RadialKernel {
    /// Largest available index.
    pub fn kmax(&self) -> usize {
        self.scaled.len().saturating_sub(1)
    }

    /// `E(k)`.
    pub fn e(&self, k: usize) -> Complex64 {
        self.scaled[k] * (self.q as f64).powf(-(k as f64) / 2.0)
    }

    /// Writes `k,E_re,E_im,tail_bound` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "k,E_re,E_im,tail_bound")?;
        for k in 0..self.scaled.len() {
            let e = self.e(k);
            let tb = self.tail_bound * (self.q as f64).powf(-(k as f64) / 2.0);
            writeln!(out, "{k},{:e},{:e},{:e}", e.re, e.im, tb)?;
        }
        Ok(())
    }
}

/// Radial coefficients `E_F(k) = Σ_j q^{−(k+2j)/2} ∇̃k_{F(Δ_ℤ)}(k+2j+1)` for `k ≤ kmax`.
pub fn e_f_coefficients(q: u64, f: impl Fn(f64) -> Complex64, kmax: usize, tol: f64, grid: usize) -> Result<RadialKernel> {
    if q < 2 {
        return Err(Error::InvalidArgument("geometric tail certification needs q ≥ 2".into()));
    }
    let qf = q as f64;
    let mut j_terms = 1usize;
    let probe = z_grad_multiplier_kernel(&f, kmax + 3, grid)?;
    let grad_sup = probe.kernel.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max).max(1e-300);
    while grad_sup * qf.powi(-(j_terms as i32)) / (1.0 - 1.0 / qf) >= tol {
        j_terms += 1;
        if j_terms > 4000 {
            return Err(Error::Accuracy("tolerance unreachable within the j-limit".into()));
        }
    }
    let nmax = kmax + 2 * j_terms + 1;
    let grad = z_grad_multiplier_kernel(&f, nmax, grid.max(4 * nmax))?;
    let grad_sup = grad.kernel.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let scaled = (0..=kmax)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..j_terms {
                acc += grad.kernel.get((k + 2 * j + 1) as i64) * qf.powi(-(j as i32));
            }
            acc
        })
        .collect();
    let tail_bound = grad_sup * qf.powi(-(j_terms as i32)) / (1.0 - 1.0 / qf);
    Ok(RadialKernel { q, scaled, tail_bound, grad_sup })
}

/// Kernel `q^{−(ℓx+ℓy)/2} E(d)` with its propagated tail bound.
pub fn homog_kernel_value(radial: &RadialKernel, lx: i64, ly: i64, d: usize) -> Result<(Complex64, f64)> {
    if d > radial.kmax() {
        return Err(Error::InvalidArgument(format!("distance {d} beyond kmax {}", radial.kmax())));
    }
    let scale = (radial.q as f64).powf(-((lx + ly) as f64 + d as f64) / 2.0);
    Ok((radial.scaled[d] * scale, radial.tail_bound * scale))
}

/// `Σ_x |K(x, y)| w(d(x, y)) m(x)` for a radial kernel on `𝕋_q`.
pub fn homog_weighted_l1(radial: &RadialKernel, w: impl Fn(usize) -> f64) -> Result<f64> {
    let mut total = 0.0;
    let mut last = 0.0;
    for d in 0..=radial.kmax() {
        last = w(d) * radial.scaled[d].norm() * sphere_mass_factor(radial.q, d);
        total += last;
    }
    if last > 1e-8 * total.max(1e-300) && total > 0.0 {
        return Err(Error::Accuracy("dominated-tail check failed: kmax too small".into()));
    }
    Ok(total)
}

/// Schrödinger-type multiplier `e^{itλ} χ₀(λ)` with the plateau bump `χ₀`.
pub fn schrodinger_multiplier(t: f64) -> impl Fn(f64) -> Complex64 {
    move |l: f64| {
        let c = plateau_bump(l);
        if c == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, t * l).exp() * c
        }
    }
}

fn sharpness_symbol_kernel(q: u64, f: &dyn Fn(f64) -> Complex64, kmax: usize, grid: usize) -> Vec<Complex64> {
    let qf = q as f64;
    let mut buf: Vec<Complex64> = (0..grid)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / grid as f64;
            let val = f(1.0 - th.cos());
            if val == Complex64::new(0.0, 0.0) {
                return val;
            }
            let e1 = Complex64::new(0.0, th).exp();
            Complex64::new(0.0, -2.0 * th.sin()) * val * (1.0 - e1) * e1 / (1.0 - e1 * e1 / qf)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
    (0..=kmax).map(|k| buf[k] / grid as f64).collect()
}

/// Scaled oscillatory combination `q^{k/2}(E(k) − q^{1/2} E(k+1))` for `k ≤ kmax`.
pub fn tilde_e_scaled(q: u64, f: impl Fn(f64) -> Complex64, kmax: usize, grid: usize) -> Result<Vec<Complex64>> {
    if q < 2 {
        return Err(Error::InvalidArgument("needs q ≥ 2".into()));
    }
    if grid <= 2 * kmax + 2 {
        return Err(Error::InvalidArgument("grid too small".into()));
    }
    let a = sharpness_symbol_kernel(q, &f, kmax, grid);
    let b = sharpness_symbol_kernel(q, &f, kmax, 2 * grid);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if diff > ALIASING_TOL {
        return Err(Error::Accuracy(format!("oscillatory aliasing guard tripped ({diff:e})")));
    }
    Ok(b)
}

/// `Ẽ_{F_t}(k) = E_{F_t}(k) − q^{1/2} E_{F_t}(k+1)` for `F_t(λ) = e^{itλ}χ₀(λ)`.
pub fn sharpness_radial(q: u64, t: f64, kmax: usize, grid: usize) -> Result<Vec<Complex64>> {
    let scaled = tilde_e_scaled(q, schrodinger_multiplier(t), kmax, grid)?;
    let qf = q as f64;
    Ok(scaled.into_iter().enumerate().map(|(k, v)| v * qf.powf(-(k as f64) / 2.0)).collect())
}

/// Weighted column sum of `F(𝓛_q)∇` split into the parts with `x` not below `y` and
/// `x` strictly below `y`, from scaled radial data `Ê`.
pub fn gradient_column_mass(q: u64, scaled_e: &[Complex64]) -> (f64, f64) {
    let qf = q as f64;
    let n = scaled_e.len();
    let at = |k: usize| scaled_e.get(k).copied().unwrap_or_default();
    let mut not_below = 0.0;
    let mut below = 0.0;
    for k in 0..n.saturating_sub(1) {
        let tilde = at(k) - at(k + 1);
        let mass = if k == 0 { 1.0 } else { sphere_mass_factor(q, k) - 1.0 };
        not_below += tilde.norm() * mass;
        if k >= 1 {
            let b = at(k) - at(k - 1) - at(k + 1) * ((qf - 1.0) / qf);
            below += b.norm();
        }
    }
    (not_below, below)
}

/// Float radial profile of an exact polynomial profile.
pub fn surd_to_complex(v: &[QuadSurd]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(x.to_f64(), 0.0)).collect()
}

/// True when every entry of an exact profile vanishes beyond `k`.
pub fn exact_support(v: &[QuadSurd]) -> usize {
    v.iter().rposition(|x| !x.is_zero()).map(|i| i + 1).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn s(x: i64) -> QuadSurd {
        QuadSurd::rational(ratio(x, 1))
    }

    #[test]
    fn sphere_counts() {
        assert_eq!(sphere_count(2, 3, 3), 1);
        assert_eq!(sphere_count(2, 2, 0), 1);
        assert_eq!(sphere_count(2, 2, -2), 4);
        assert_eq!(sphere_count(3, 2, 1), 0);
    }

    #[test]
    fn forward_examples() {
        assert_eq!(abel_forward(3, &[s(1)]), vec![s(1)]);
        assert_eq!(abel_forward(3, &[s(0), s(0), s(1)]), vec![s(2), s(0), s(3)]);
    }

    #[test]
    fn round_trip_small() {
        let psi = vec![s(2), s(-1), s(5), s(0), s(7)];
        for q in [2, 3, 4, 5] {
            assert_eq!(abel_forward(q, &abel_inverse(q, &psi)), psi);
        }
    }

    #[test]
    fn laplacian_profile() {
        let e = e_f_polynomial_exact(2, &[ratio(0, 1), ratio(1, 1)]);
        assert_eq!(e[0], s(1));
        assert_eq!(e[1], QuadSurd::half_power(2, -1) * QuadSurd::rational(ratio(-1, 2)));
        assert!(e[2..].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn float_profile_matches_exact() {
        let r = e_f_coefficients(3, |l| Complex64::new(l, 0.0), 4, 1e-14, 256).unwrap();
        assert!((r.e(0).re - 1.0).abs() < 1e-13);
        assert!((r.e(1).re + 0.5 / 3f64.sqrt()).abs() < 1e-13);
        assert!(r.e(2).norm() < 1e-13);
    }

    #[test]
    fn weighted_l1_examples() {
        let id = e_f_coefficients(2, |_| Complex64::new(1.0, 0.0), 6, 1e-15, 256).unwrap();
        assert!((homog_weighted_l1(&id, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        let lap = e_f_coefficients(2, |l| Complex64::new(l, 0.0), 6, 1e-15, 256).unwrap();
        assert!((homog_weighted_l1(&lap, |_| 1.0).unwrap() - 2.0).abs() < 1e-12);
    }
}
