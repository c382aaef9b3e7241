//! Special functions: scaled modified Bessel values, complex log-Gamma, and the
//! smooth cut-off functions used to build compactly supported multipliers.

use num::complex::Complex64;
use std::f64::consts::PI;

/// `e^{−t} I_k(t)` for `k = 0..=kmax` by normalized backward recurrence.
pub fn scaled_bessel_i(t: f64, kmax: usize) -> Vec<f64> {
    assert!(t >= 0.0 && t.is_finite(), "argument must be finite and nonnegative");
    let mut out = vec![0.0; kmax + 1];
    if t == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max((10.0 * t.sqrt()) as usize + (t.min(50.0) as usize)) + 40;
    let mut tail = vec![0.0; start + 2];
    tail[start + 1] = 0.0;
    tail[start] = 1e-300;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / t) * tail[k] + tail[k + 1];
        tail[k - 1] = prev;
        if prev > 1e250 {
            for v in tail.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm: f64 = tail[0] + 2.0 * tail[1..=start].iter().sum::<f64>();
    for k in 0..=kmax {
        out[k] = tail[k] / norm;
    }
    out
}

/// Chebyshev coefficients of `λ ↦ e^{−tλ}` in the variable `λ − 1`.
pub fn heat_chebyshev_coefficients(t: f64, n: usize) -> Vec<f64> {
    let b = scaled_bessel_i(t, n);
    b.iter()
        .enumerate()
        .map(|(k, &v)| {
            let two = if k == 0 { 1.0 } else { 2.0 };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            two * sign * v
        })
        .collect()
}

/// Sum of `|c_k|` beyond degree `n` for the heat coefficients.
pub fn heat_chebyshev_tail(t: f64, n: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let extra = (12.0 * t.sqrt()) as usize + 60;
    let b = scaled_bessel_i(t, n + extra);
    2.0 * b[n + 1..].iter().sum::<f64>()
}

/// Smallest degree whose heat tail falls below `tol`.
pub fn heat_degree(t: f64, tol: f64) -> usize {
    if t == 0.0 {
        return 0;
    }
    let cap = (14.0 * t.sqrt()) as usize + 80;
    let b = scaled_bessel_i(t, cap);
    let mut tail = 0.0;
    for k in (0..=cap).rev() {
        tail += 2.0 * b[k];
        if tail >= tol {
            return k.min(cap);
        }
    }
    0
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal branch of `ln Γ(z)` by the Lanczos approximation with reflection.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi.ln() - (pi * z).sin().ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `Γ(z)` for complex `z` with moderate modulus.
pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// Smooth transition that is 0 for `u ≤ 0`, 1 for `u ≥ 1`, and `C^∞` in between.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

/// Even bump equal to 1 on `[−1/4, 1/4]` and supported in `[−1/2, 1/2]`.
pub fn plateau_bump(x: f64) -> f64 {
    1.0 - smoothstep((x.abs() - 0.25) / 0.25)
}

/// Cut-off equal to 1 on `[0, 1/2]` and vanishing beyond 1.
pub fn low_pass(x: f64) -> f64 {
    1.0 - smoothstep((x - 0.5) / 0.5)
}

/// Dyadic piece `ψ(λ) − ψ(2λ)` supported in `(1/4, 1)`.
pub fn dyadic_bump(x: f64) -> f64 {
    low_pass(x) - low_pass(2.0 * x)
}

/// Bump supported in `[1/4, 7/4]`, equal to 1 on `[1/2, 3/2]`.
pub fn central_bump(x: f64) -> f64 {
    1.0 - smoothstep((((x - 1.0).abs()) - 0.5) / 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_matches_series() {
        for &t in &[0.1, 1.0, 3.0] {
            let b = scaled_bessel_i(t, 6);
            for k in 0..=6 {
                let mut s = 0.0;
                let mut term = (t / 2.0f64).powi(k as i32) / (1..=k).map(|j| j as f64).product::<f64>();
                for j in 0..60 {
                    s += term;
                    term *= (t / 2.0) * (t / 2.0) / ((j + 1) as f64 * (j + 1 + k) as f64);
                }
                assert!((b[k] - (-t).exp() * s).abs() < 1e-14 * (1.0 + s), "t={t} k={k}");
            }
        }
    }

    #[test]
    fn bessel_large_argument_normalization() {
        let t = 4096.0;
        let b = scaled_bessel_i(t, 800);
        let asym = 1.0 / (2.0 * PI * t).sqrt();
        assert!((b[0] / asym - 1.0).abs() < 1e-3);
        assert!(heat_chebyshev_tail(t, 600) < 1e-14);
    }

    #[test]
    fn gamma_values() {
        let g = gamma(Complex64::new(0.5, 0.0));
        assert!((g.re - PI.sqrt()).abs() < 1e-13 && g.im.abs() < 1e-13);
        let g5 = gamma(Complex64::new(5.0, 0.0));
        assert!((g5.re - 24.0).abs() < 1e-11);
        let z = Complex64::new(0.3, 1.7);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn bumps_have_requested_plateaus() {
        assert_eq!(plateau_bump(0.2), 1.0);
        assert_eq!(plateau_bump(0.5), 0.0);
        assert_eq!(dyadic_bump(0.25), 0.0);
        assert_eq!(dyadic_bump(1.0), 0.0);
        assert!(dyadic_bump(0.5) > 0.99);
        assert_eq!(central_bump(1.2), 1.0);
        assert_eq!(central_bump(0.25), 0.0);
        assert_eq!(central_bump(1.75), 0.0);
    }
}
