//! Chebyshev models of spectral multipliers on `[0, 2]` and their evaluation on
//! windows by the three-term recurrence in `𝓛 − I = −𝓐`.

use std::f64::consts::PI;

use num::complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ops::KernelColumn;
use crate::special::{heat_chebyshev_coefficients, heat_chebyshev_tail};
use crate::tree::{FlowTree, VertexId};

/// Chebyshev expansion `Σ_k c_k T_k(λ − 1)` of a multiplier on `[0, 2]`.
#[derive(Clone, Debug, Serialize)]
pub struct ChebModel {
    pub coeffs: Vec<Complex64>,
    /// Estimated (or bounded, when `rigorous`) `sup_{[0,2]} |F − P_N|`.
    pub sup_err: f64,
    /// True when `sup_err` is a bound rather than a dense-grid estimate.
    pub rigorous: bool,
}

impl ChebModel {
    /// Polynomial degree `N`.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Evaluates the model at `λ` by Clenshaw's recurrence.
    pub fn eval(&self, lambda: f64) -> Complex64 {
        clenshaw(&self.coeffs, lambda - 1.0)
    }

    /// Real parts of the coefficients when the model is real.
    pub fn real_coeffs(&self) -> Option<Vec<f64>> {
        self.coeffs.iter().all(|c| c.im == 0.0).then(|| self.coeffs.iter().map(|c| c.re).collect())
    }

    /// Model of the heat multiplier `e^{−tλ}` with a tail bound on the dropped coefficients.
    pub fn heat(t: f64, degree: usize) -> Self {
        let c = heat_chebyshev_coefficients(t, degree);
        ChebModel {
            coeffs: c.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
            sup_err: heat_chebyshev_tail(t, degree),
            rigorous: true,
        }
    }
}

fn clenshaw(c: &[Complex64], s: f64) -> Complex64 {
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for k in (1..c.len()).rev() {
        let b0 = c[k] + 2.0 * s * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => c0 + s * b1 - b2,
        None => Complex64::new(0.0, 0.0),
    }
}

/// Degree-`n` Chebyshev interpolant of `f` on `[0, 2]` with a dense-grid error estimate.
pub fn cheb_approx(f: impl Fn(f64) -> Complex64, n: usize) -> Result<ChebModel> {
    let nodes = n + 1;
    let samples: Vec<Complex64> = (0..nodes)
        .map(|j| {
            let s = (PI * (j as f64 + 0.5) / nodes as f64).cos();
            f(s + 1.0)
        })
        .collect();
    if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Accuracy("non-finite sample value".into()));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); nodes];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            acc += v * (PI * k as f64 * (j as f64 + 0.5) / nodes as f64).cos();
        }
        let scale = if k == 0 { 1.0 } else { 2.0 };
        *ck = acc * (scale / nodes as f64);
    }
    let grid = (32 * n).max(256);
    let mut sup_err: f64 = 0.0;
    for i in 0..=grid {
        let lambda = 2.0 * i as f64 / grid as f64;
        let exact = f(lambda);
        if !exact.re.is_finite() || !exact.im.is_finite() {
            return Err(Error::Accuracy("non-finite sample value".into()));
        }
        sup_err = sup_err.max((exact - clenshaw(&coeffs, lambda - 1.0)).norm());
    }
    Ok(ChebModel { coeffs, sup_err, rigorous: false })
}

/// Compressed adjacency of a flow tree for fast float evaluation of `𝓐`.
pub struct FastAveraging {
    pred: Vec<usize>,
    child_start: Vec<usize>,
    children: Vec<usize>,
    ratio: Vec<f64>,
    complete: Vec<bool>,
    mass: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl FastAveraging {
    /// Extracts the structure of a flow tree.
    pub fn new(tree: &FlowTree) -> Self {
        let w = &tree.window;
        let mass = tree.masses_f64();
        let n = w.len();
        let mut child_start = Vec::with_capacity(n + 1);
        let mut children = Vec::with_capacity(n);
        for v in 0..n {
            child_start.push(children.len());
            children.extend_from_slice(w.succ(v));
        }
        child_start.push(children.len());
        let pred: Vec<usize> = (0..n).map(|v| w.pred(v).unwrap_or(NONE)).collect();
        let ratio = (0..n).map(|v| if pred[v] == NONE { 1.0 } else { mass[v] / mass[pred[v]] }).collect();
        let complete = (0..n).map(|v| w.is_complete(v)).collect();
        FastAveraging { pred, child_start, children, ratio, complete, mass }
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.pred.len()
    }

    /// True for an empty structure.
    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    /// Float masses.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `dst = −𝓐 src · scale − sub` (the Chebyshev step with `scale ∈ {1, 2}`).
    fn step(&self, src: &[f64], sub: Option<&[f64]>, scale: f64, dst: &mut [f64]) {
        let h = -0.5 * scale;
        for v in 0..self.len() {
            let mut acc = if self.pred[v] != NONE { src[self.pred[v]] } else { 0.0 };
            for &c in &self.children[self.child_start[v]..self.child_start[v + 1]] {
                acc += src[c] * self.ratio[c];
            }
            let mut val = h * acc;
            if let Some(s) = sub {
                val -= s[v];
            }
            dst[v] = val;
        }
    }

    fn exact_step(&self, exact: &[bool], dist: &[usize], steps: usize, dst: &mut [bool]) {
        for v in 0..self.len() {
            let zero_outside = dist[v] == usize::MAX || dist[v] + 1 > steps;
            let up = if self.pred[v] != NONE { exact[self.pred[v]] } else { zero_outside };
            let mut down = self.complete[v] || zero_outside;
            for &c in &self.children[self.child_start[v]..self.child_start[v + 1]] {
                down &= exact[c];
            }
            dst[v] = up && down;
        }
    }

    fn distances(&self, init: &[f64]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = std::collections::VecDeque::new();
        for (v, &x) in init.iter().enumerate() {
            if x != 0.0 {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            let p = self.pred[v];
            if p != NONE && dist[p] == usize::MAX {
                dist[p] = d;
                queue.push_back(p);
            }
            for &c in &self.children[self.child_start[v]..self.child_start[v + 1]] {
                if dist[c] == usize::MAX {
                    dist[c] = d;
                    queue.push_back(c);
                }
            }
        }
        dist
    }

    /// Runs the Chebyshev recurrence `u_k = T_k(𝓛 − I) 𝟙_y` for `k ≤ degree`,
    /// calling `visit(k, u_k)` at each step, and returns the vertices where every
    /// visited `u_k` is exact.
    pub fn chebyshev_sweep(&self, y: VertexId, degree: usize, visit: impl FnMut(usize, &[f64])) -> Vec<bool> {
        let mut init = vec![0.0; self.len()];
        init[y] = 1.0;
        self.chebyshev_sweep_from(&init, degree, visit)
    }

    /// Chebyshev recurrence `u_k = T_k(𝓛 − I) u_0` from an arbitrary finitely supported `u_0`.
    pub fn chebyshev_sweep_from(&self, init: &[f64], degree: usize, mut visit: impl FnMut(usize, &[f64])) -> Vec<bool> {
        let n = self.len();
        let dist = self.distances(init);
        let mut prev = vec![0.0; n];
        let mut cur = init.to_vec();
        let mut exact_cur = vec![true; n];
        let mut exact_prev = vec![true; n];
        let mut exact_all = vec![true; n];
        visit(0, &cur);
        if degree == 0 {
            return exact_all;
        }
        let mut next = vec![0.0; n];
        let mut exact_next = vec![true; n];
        self.step(&cur, None, 1.0, &mut next);
        self.exact_step(&exact_cur, &dist, 0, &mut exact_next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        std::mem::swap(&mut exact_prev, &mut exact_cur);
        std::mem::swap(&mut exact_cur, &mut exact_next);
        for v in 0..n {
            exact_all[v] &= exact_cur[v];
        }
        visit(1, &cur);
        for k in 2..=degree {
            self.step(&cur, Some(&prev), 2.0, &mut next);
            self.exact_step(&exact_cur, &dist, k - 1, &mut exact_next);
            for v in 0..n {
                exact_next[v] &= exact_prev[v];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            std::mem::swap(&mut exact_prev, &mut exact_cur);
            std::mem::swap(&mut exact_cur, &mut exact_next);
            for v in 0..n {
                exact_all[v] &= exact_cur[v];
            }
            visit(k, &cur);
        }
        exact_all
    }

    /// Predecessor of `v` in the compressed structure.
    pub fn pred(&self, v: VertexId) -> Option<VertexId> {
        (self.pred[v] != NONE).then_some(self.pred[v])
    }

    /// True when `v` has a neighbour outside the window.
    pub fn touches_boundary(&self, v: VertexId) -> bool {
        self.pred[v] == NONE || !self.complete[v]
    }

    /// Chebyshev moments `T_k(𝓛 − I)𝟙_y` at the probe vertices.
    pub fn moments(&self, y: VertexId, degree: usize, probes: &[VertexId]) -> MomentTable {
        let mut values = vec![vec![0.0; degree + 1]; probes.len()];
        let exact = self.chebyshev_sweep(y, degree, |k, u| {
            for (i, &p) in probes.iter().enumerate() {
                values[i][k] = u[p];
            }
        });
        MomentTable {
            anchor: y,
            probes: probes.to_vec(),
            values,
            exact: probes.iter().map(|&p| exact[p]).collect(),
            anchor_mass: self.mass[y],
        }
    }

    /// Dense kernel columns of several real Chebyshev models at anchor `y`.
    pub fn columns_real(&self, y: VertexId, models: &[&[f64]]) -> (Vec<Vec<f64>>, Vec<bool>) {
        let degree = models.iter().map(|c| c.len().saturating_sub(1)).max().unwrap_or(0);
        let mut acc = vec![vec![0.0; self.len()]; models.len()];
        let exact = self.chebyshev_sweep(y, degree, |k, u| {
            for (m, c) in models.iter().enumerate() {
                if let Some(&ck) = c.get(k) {
                    if ck != 0.0 {
                        for (a, &x) in acc[m].iter_mut().zip(u) {
                            *a += ck * x;
                        }
                    }
                }
            }
        });
        let inv = 1.0 / self.mass[y];
        for col in acc.iter_mut() {
            for a in col.iter_mut() {
                *a *= inv;
            }
        }
        (acc, exact)
    }

    /// Dense kernel column of a complex Chebyshev model at anchor `y`.
    pub fn column_complex(&self, y: VertexId, coeffs: &[Complex64]) -> (Vec<Complex64>, Vec<bool>) {
        let degree = coeffs.len().saturating_sub(1);
        let mut acc = vec![Complex64::new(0.0, 0.0); self.len()];
        let exact = self.chebyshev_sweep(y, degree, |k, u| {
            let ck = coeffs[k];
            for (a, &x) in acc.iter_mut().zip(u) {
                *a += ck * x;
            }
        });
        let inv = 1.0 / self.mass[y];
        for a in acc.iter_mut() {
            *a *= inv;
        }
        (acc, exact)
    }
}

/// Chebyshev moments at a few probe vertices, reusable across many models.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub anchor: VertexId,
    pub probes: Vec<VertexId>,
    /// `values[i][k] = (T_k(𝓛 − I)𝟙_anchor)(probes[i])`.
    pub values: Vec<Vec<f64>>,
    pub exact: Vec<bool>,
    pub anchor_mass: f64,
}

impl MomentTable {
    /// Kernel values `K(probe, anchor)` of a real model.
    pub fn kernel_real(&self, coeffs: &[f64]) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| row.iter().zip(coeffs).map(|(u, c)| u * c).sum::<f64>() / self.anchor_mass)
            .collect()
    }

    /// Degree available in the table.
    pub fn degree(&self) -> usize {
        self.values.first().map(|r| r.len().saturating_sub(1)).unwrap_or(0)
    }
}

/// Kernel value of a Chebyshev model with its certificate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertifiedValue {
    pub value: Complex64,
    pub certificate: f64,
}

/// `K_{P_N(𝓛)}(x, y)` with certificate `sup_err/√(m(x)m(y))`; needs `x, y` safe at degree `N`.
pub fn kernel_value_general(tree: &FlowTree, model: &ChebModel, x: VertexId, y: VertexId) -> Result<CertifiedValue> {
    let n = model.degree();
    let safe = tree.window.safe_region(n);
    for v in [x, y] {
        if !safe[v] {
            return Err(Error::InsufficientMargin { vertex: tree.window.label(v).to_string(), radius: n });
        }
    }
    let fast = FastAveraging::new(tree);
    let (col, _) = fast.column_complex(y, &model.coeffs);
    let m = fast.mass();
    Ok(CertifiedValue { value: col[x], certificate: model.sup_err / (m[x] * m[y]).sqrt() })
}

/// Kernel column of a Chebyshev model with the L² certificate; exactness follows the window.
pub fn kernel_column_general(tree: &FlowTree, model: &ChebModel, y: VertexId) -> KernelColumn<Complex64> {
    let fast = FastAveraging::new(tree);
    let (col, exact) = fast.column_complex(y, &model.coeffs);
    let m = fast.mass();
    let min_mass = (0..tree.window.len()).filter(|&v| exact[v]).map(|v| m[v]).fold(f64::INFINITY, f64::min);
    let err = model.sup_err / (min_mass * m[y]).sqrt();
    KernelColumn::from_dense(y, col, exact, if err.is_finite() { err } else { model.sup_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials() {
        let m = cheb_approx(|l| Complex64::new(l * l, 0.0), 2).unwrap();
        assert!(m.sup_err < 1e-14);
        assert!((m.eval(0.3).re - 0.09).abs() < 1e-14);
    }

    #[test]
    fn exponential_converges() {
        let m = cheb_approx(|l| Complex64::new((-l).exp(), 0.0), 20).unwrap();
        assert!(m.sup_err <= 1e-12, "{}", m.sup_err);
        let h = ChebModel::heat(1.0, 20);
        for (a, b) in h.coeffs.iter().zip(&m.coeffs) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn absolute_value_error_decays_like_inverse_degree() {
        let e32 = cheb_approx(|l| Complex64::new((l - 1.0).abs(), 0.0), 32).unwrap().sup_err;
        let e64 = cheb_approx(|l| Complex64::new((l - 1.0).abs(), 0.0), 64).unwrap().sup_err;
        let ratio = e32 / e64;
        assert!(ratio > 1.6 && ratio < 2.5, "ratio {ratio}");
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(cheb_approx(|l| Complex64::new(1.0 / (l - 1.0), 0.0), 3).is_err());
    }
}
