//! Fourier multipliers of the Laplacian on the integers: convolution kernels,
//! symmetric-gradient kernels, and imaginary powers.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num::complex::Complex64;
use num::{BigInt, BigRational, One, Zero};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Absolute change under grid doubling beyond which a kernel is declared aliased.
pub const ALIASING_TOL: f64 = 1e-10;

/// Convolution kernel on `ℤ` stored on `[−nmax, nmax]`.
#[derive(Clone, Debug, Serialize)]
pub struct ZKernel {
    pub nmax: usize,
    /// Grid size of the trapezoid rule that produced the values (0 for closed forms).
    pub grid: usize,
    values: Vec<Complex64>,
}

impl ZKernel {
    /// Wraps values indexed from `−nmax`.
    pub fn from_values(nmax: usize, grid: usize, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), 2 * nmax + 1);
        ZKernel { nmax, grid, values }
    }

    /// `k(n)`, zero outside the stored range.
    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.nmax {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(n + self.nmax as i64) as usize]
        }
    }

    /// Iterator over `(n, k(n))`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (i as i64 - self.nmax as i64, v))
    }

    /// Largest entrywise difference with another kernel on the common range.
    pub fn max_diff(&self, other: &ZKernel) -> f64 {
        let r = self.nmax.min(other.nmax) as i64;
        (-r..=r).map(|n| (self.get(n) - other.get(n)).norm()).fold(0.0, f64::max)
    }

    /// `Σ_n w(n) |k(n)|²`.
    pub fn weighted_l2(&self, w: impl Fn(i64) -> f64) -> f64 {
        self.iter().map(|(n, v)| w(n) * v.norm_sqr()).sum()
    }

    /// Writes `n,re,im` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "n,re,im")?;
        for (n, v) in self.iter() {
            writeln!(out, "{n},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

fn fourier_coefficients(symbol: &dyn Fn(f64) -> Complex64, nmax: usize, grid: usize) -> Result<ZKernel> {
    if grid <= 2 * nmax {
        return Err(Error::InvalidArgument(format!("grid {grid} too small for nmax {nmax}")));
    }
    let mut buf: Vec<Complex64> = (0..grid).map(|j| symbol(2.0 * PI * j as f64 / grid as f64)).collect();
    if buf.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Accuracy("non-finite symbol value".into()));
    }
    FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
    let scale = 1.0 / grid as f64;
    let values = (-(nmax as i64)..=nmax as i64).map(|n| buf[n.rem_euclid(grid as i64) as usize] * scale).collect();
    Ok(ZKernel::from_values(nmax, grid, values))
}

/// `(1/2π)∫ M(θ) e^{inθ} dθ` by the trapezoid rule, with the doubling guard.
pub fn symbol_kernel(symbol: impl Fn(f64) -> Complex64, nmax: usize, grid: usize) -> Result<ZKernel> {
    let a = fourier_coefficients(&symbol, nmax, grid)?;
    let b = fourier_coefficients(&symbol, nmax, 2 * grid)?;
    let diff = a.max_diff(&b);
    if diff > ALIASING_TOL {
        return Err(Error::Accuracy(format!("aliasing guard: grid doubling changed values by {diff:e}")));
    }
    Ok(b)
}

/// Kernel of `F(Δ_ℤ)`: `k(n) = (1/2π)∫ F(1 − cos θ) e^{inθ} dθ`.
pub fn z_multiplier_kernel(f: impl Fn(f64) -> Complex64, nmax: usize, grid: usize) -> Result<ZKernel> {
    symbol_kernel(|th| f(1.0 - th.cos()), nmax, grid)
}

/// Symmetric gradient `∇̃k(n) = k(n − 1) − k(n + 1)` of the kernel of `F(Δ_ℤ)`,
/// computed through the multiplier `−2i sin θ · F(1 − cos θ)`.
pub fn z_grad_multiplier_kernel(f: impl Fn(f64) -> Complex64, nmax: usize, grid: usize) -> Result<GradKernel> {
    let primary = symbol_kernel(|th| Complex64::new(0.0, -2.0 * th.sin()) * f(1.0 - th.cos()), nmax, grid)?;
    let base = z_multiplier_kernel(&f, nmax + 1, grid)?;
    let values: Vec<Complex64> =
        (-(nmax as i64)..=nmax as i64).map(|n| base.get(n - 1) - base.get(n + 1)).collect();
    let difference = ZKernel::from_values(nmax, base.grid, values);
    let route_gap = primary.max_diff(&difference);
    Ok(GradKernel { kernel: primary, route_gap })
}

/// Symmetric-gradient kernel together with the gap between its two evaluation routes.
#[derive(Clone, Debug, Serialize)]
pub struct GradKernel {
    pub kernel: ZKernel,
    pub route_gap: f64,
}

/// Parseval residual `|Σ|k(n)|² − (1/2π)∫|F(1 − cos θ)|² dθ|` for kernels supported in `[−nmax, nmax]`.
pub fn parseval_residual(f: impl Fn(f64) -> Complex64, nmax: usize, grid: usize) -> Result<f64> {
    let k = z_multiplier_kernel(&f, nmax, grid)?;
    let lhs: f64 = k.iter().map(|(_, v)| v.norm_sqr()).sum();
    let big = 4 * grid;
    let rhs: f64 = (0..big).map(|j| f(1.0 - (2.0 * PI * j as f64 / big as f64).cos()).norm_sqr()).sum::<f64>()
        / big as f64;
    Ok((lhs - rhs).abs())
}

/// Imaginary-power kernel values by quadrature and by the Gamma quotient.
#[derive(Clone, Debug, Serialize)]
pub struct ImaginaryPowerKernel {
    pub alpha: f64,
    /// Quadrature values `k(n)` for `n = 0..=nmax`.
    pub quadrature: Vec<Complex64>,
    /// Closed-form values for `n = 1..=nmax` (index 0 unused).
    pub closed_form: Vec<Complex64>,
    /// Largest discrepancy over `n ≥ 1`.
    pub max_discrepancy: f64,
}

impl ImaginaryPowerKernel {
    /// `|k(n)|·n` for `n = lo..=hi` from the closed form.
    pub fn decay_profile(&self, lo: usize, hi: usize) -> Vec<(usize, f64)> {
        (lo..=hi.min(self.closed_form.len() - 1)).map(|n| (n, self.closed_form[n].norm() * n as f64)).collect()
    }
}

/// `(1/π)∫₀^π (1 − cos θ)^{iα} cos(nθ) dθ` after the substitution `θ = π e^{−u}`.
pub fn imaginary_power_quadrature(alpha: f64, n: usize) -> Complex64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero"));
    let nodes: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    let integrand = |u: f64| {
        let th = PI * (-u).exp();
        let base = if th < 1e-4 { th * th / 2.0 * (1.0 - th * th / 12.0) } else { 1.0 - th.cos() };
        let phase = alpha * base.ln();
        Complex64::new(phase.cos(), phase.sin()) * (n as f64 * th).cos() * th
    };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut u: f64 = 0.0;
    let umax = 45.0;
    while u < umax {
        let rate = 1.0 + n as f64 * PI * (-u).exp();
        let width = (0.5 / rate).min(umax - u);
        let (a, b) = (u, u + width);
        let half = 0.5 * width;
        let mid = 0.5 * (a + b);
        for &(x, w) in &nodes {
            acc += integrand(mid + half * x) * (w * half);
        }
        u = b;
    }
    acc / PI
}

/// Gamma-quotient value of the imaginary-power kernel for `n ≠ 0`.
pub fn imaginary_power_closed_form(alpha: f64, n: i64) -> Complex64 {
    assert!(n != 0, "closed form applies to n ≠ 0");
    let i = Complex64::new(0.0, 1.0);
    let ia = i * alpha;
    let one = Complex64::new(1.0, 0.0);
    let prefactor = (ia * 2f64.ln()).exp() / PI.sqrt()
        * (ln_gamma(0.5 + ia) - ln_gamma(-ia) + ln_gamma(one - ia) - ln_gamma(2.0 + ia)).exp();
    let mut prod = one;
    for j in 1..n.unsigned_abs() {
        let j = j as f64;
        prod *= (j - ia) / (j + 1.0 + ia);
    }
    prefactor * prod
}

/// Kernel of `Δ_ℤ^{iα}` on `0..=nmax` by both routes.
pub fn imaginary_power_kernel(alpha: f64, nmax: usize) -> Result<ImaginaryPowerKernel> {
    if alpha == 0.0 {
        return Err(Error::InvalidArgument("imaginary power needs α ≠ 0".into()));
    }
    if nmax == 0 {
        return Err(Error::InvalidArgument("imaginary power needs nmax ≥ 1".into()));
    }
    let quadrature: Vec<Complex64> = (0..=nmax).map(|n| imaginary_power_quadrature(alpha, n)).collect();
    let mut closed_form = vec![Complex64::new(f64::NAN, f64::NAN)];
    closed_form.extend((1..=nmax as i64).map(|n| imaginary_power_closed_form(alpha, n)));
    let max_discrepancy = (1..=nmax).map(|n| (quadrature[n] - closed_form[n]).norm()).fold(0.0, f64::max);
    Ok(ImaginaryPowerKernel { alpha, quadrature, closed_form, max_discrepancy })
}

/// Exact kernel `k(n)`, `n ≥ 0`, of `Σ_j a_j Δ_ℤ^j` (the kernel is even in `n`).
pub fn z_polynomial_kernel_exact(coeffs: &[BigRational]) -> Vec<BigRational> {
    let deg = coeffs.len().saturating_sub(1);
    let width = 2 * deg + 1;
    let mut power = vec![BigRational::zero(); width];
    power[deg] = BigRational::one();
    let mut out = vec![BigRational::zero(); width];
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for (j, a) in coeffs.iter().enumerate() {
        if j > 0 {
            let mut next = vec![BigRational::zero(); width];
            for i in 0..width {
                if power[i].is_zero() {
                    continue;
                }
                next[i] += &power[i];
                if i + 1 < width {
                    next[i + 1] -= &power[i] * &half;
                }
                if i > 0 {
                    next[i - 1] -= &power[i] * &half;
                }
            }
            power = next;
        }
        for i in 0..width {
            out[i] += a * &power[i];
        }
    }
    out[deg..].to_vec()
}

/// Heat kernel on `ℤ`: `e^{−t} I_{|n|}(t)`.
pub fn z_heat_kernel(t: f64, nmax: usize) -> Vec<f64> {
    crate::special::scaled_bessel_i(t, nmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Complex64 {
        move |x| Complex64::new(f(x), 0.0)
    }

    #[test]
    fn laplacian_kernels() {
        let k = z_multiplier_kernel(real(|_| 1.0), 4, 64).unwrap();
        assert!((k.get(0).re - 1.0).abs() < 1e-14 && k.get(1).norm() < 1e-14);
        let k = z_multiplier_kernel(real(|x| x), 4, 64).unwrap();
        assert!((k.get(0).re - 1.0).abs() < 1e-14);
        assert!((k.get(1).re + 0.5).abs() < 1e-14 && (k.get(-1).re + 0.5).abs() < 1e-14);
        assert!(k.get(2).norm() < 1e-14);
        let k = z_multiplier_kernel(real(|x| x * x), 4, 64).unwrap();
        assert!((k.get(0).re - 1.5).abs() < 1e-14);
        assert!((k.get(1).re + 1.0).abs() < 1e-14);
        assert!((k.get(2).re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn gradient_kernels() {
        let g = z_grad_multiplier_kernel(real(|_| 1.0), 4, 64).unwrap();
        assert!(g.route_gap < 1e-12);
        assert!((g.kernel.get(1).re - 1.0).abs() < 1e-14 && (g.kernel.get(-1).re + 1.0).abs() < 1e-14);
        let g = z_grad_multiplier_kernel(real(|x| x), 4, 64).unwrap();
        assert!((g.kernel.get(2).re + 0.5).abs() < 1e-14);
        for n in 0..4 {
            assert!((g.kernel.get(n) + g.kernel.get(-n)).norm() < 1e-14);
        }
    }

    #[test]
    fn aliasing_guard_trips() {
        let r = z_multiplier_kernel(real(|x| (40.0 * x).cos()), 3, 16);
        assert!(r.is_err());
    }

    #[test]
    fn exact_polynomial_kernels() {
        use crate::scalar::ratio;
        let k = z_polynomial_kernel_exact(&[ratio(0, 1), ratio(0, 1), ratio(1, 1)]);
        assert_eq!(k, vec![ratio(3, 2), ratio(-1, 1), ratio(1, 4)]);
    }

    #[test]
    fn heat_kernel_matches_bessel() {
        let k = z_multiplier_kernel(real(|x| (-x).exp()), 10, 128).unwrap();
        let b = z_heat_kernel(1.0, 10);
        for n in 0..=10 {
            assert!((k.get(n as i64).re - b[n]).abs() < 1e-14);
        }
    }

    #[test]
    fn imaginary_power_routes_agree() {
        let k = imaginary_power_kernel(1.0, 8).unwrap();
        assert!(k.max_discrepancy < 1e-8, "{}", k.max_discrepancy);
        let c = imaginary_power_kernel(-1.0, 8).unwrap();
        for n in 0..=8 {
            assert!((c.quadrature[n] - k.quadrature[n].conj()).norm() < 1e-12);
        }
    }
}
