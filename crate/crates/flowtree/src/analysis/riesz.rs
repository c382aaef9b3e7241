//! The Riesz kernel `K_𝓡(x,y) = (1/√π) ∫₀^∞ K_{∇e^{−t𝓛}}(x,y) t^{−1/2} dt` by
//! quadrature, its closed-form skew part, and the divergence probe.

use super::EstimateReport;
use crate::cheb::{FastAveraging, MomentTable};
use crate::error::{Error, Result};
use crate::quotient::{anchor_comb, AnchorComb};
use crate::special::{heat_chebyshev_coefficients, heat_degree};
use crate::tree::{FlowTree, TreeWindow, VertexId};
use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Skew part of the discrete Hilbert kernel on the integers,
/// `k̃(n) = (2√2/π) · n/(n² − 1/4)`.
pub fn hilbert_skew(n: i64) -> f64 {
    let nf = n as f64;
    2.0 * 2f64.sqrt() / PI * nf / (nf * nf - 0.25)
}

/// Closed form of `K_𝓡(x,y) − conj K_𝓡(y,x)`: `k̃(ℓx−ℓy)/m(y)` when `x` lies
/// strictly below `y`, `k̃(ℓx−ℓy)/m(x)` when `y` lies strictly below `x`, zero otherwise.
pub fn riesz_skew_closed(tree: &FlowTree, x: VertexId, y: VertexId) -> Complex64 {
    let w = &tree.window;
    let n = w.level(x) - w.level(y);
    let value = if x == y {
        0.0
    } else if w.is_descendant(x, y) {
        hilbert_skew(n) / tree.measure.value_f64(y)
    } else if w.is_descendant(y, x) {
        hilbert_skew(n) / tree.measure.value_f64(x)
    } else {
        0.0
    };
    Complex64::new(value, 0.0)
}

/// Quadrature parameters for the Riesz integral.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureSpec {
    /// Cutoff `T` of the interior integral.
    pub t_cut: f64,
    /// Panel width in the variable `u = √t`.
    pub panel_width: f64,
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Sample points in `[T/4, T]` used to fit the power-law tail.
    pub tail_points: usize,
    /// Tolerance for the heat Chebyshev degree at `t = T`.
    pub degree_tol: f64,
    /// Level-estimate constant `C_lev` for the a-priori tail bound, when measured.
    pub level_constant: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            t_cut: 4096.0,
            panel_width: 0.5,
            nodes_per_panel: 16,
            tail_points: 12,
            degree_tol: 1e-16,
            level_constant: None,
        }
    }
}

impl QuadratureSpec {
    /// The a-priori bound `(2/√π) C_lev T^{−1/2} / m(y)` on the integral beyond `T`.
    pub fn tail_bound(&self, t: f64, anchor_mass: f64) -> Option<f64> {
        self.level_constant.map(|c| 2.0 * c / (PI.sqrt() * t.sqrt() * anchor_mass))
    }
}

/// Integrated Chebyshev weights for the Riesz integral.
#[derive(Clone, Debug)]
pub struct RieszQuadrature {
    pub spec: QuadratureSpec,
    pub degree: usize,
    /// `W_k = (1/√π)∫₀^T c_k(t) t^{−1/2} dt` with the fine panels.
    pub weights: Vec<f64>,
    /// The same with panels twice as wide, for the interior error estimate.
    pub coarse_weights: Vec<f64>,
    pub tail_times: Vec<f64>,
    /// `c_k(t_j)` at the tail sample times.
    pub tail_coeffs: Vec<Vec<f64>>,
}

fn panel_weights(t_cut: f64, width: f64, nodes: usize, degree: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(std::num::NonZeroUsize::new(nodes).expect("at least one node"));
    let rule: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let u_max = t_cut.sqrt();
    let panels = (u_max / width).ceil() as usize;
    let h = u_max / panels as f64;
    let mut out = vec![0.0; degree + 1];
    let scale = 2.0 / PI.sqrt();
    for p in 0..panels {
        let (a, b) = (p as f64 * h, (p + 1) as f64 * h);
        for &(x, wt) in &rule {
            let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let c = heat_chebyshev_coefficients(u * u, degree);
            let f = scale * wt * 0.5 * (b - a);
            for (o, ck) in out.iter_mut().zip(&c) {
                *o += f * ck;
            }
        }
    }
    out
}

impl RieszQuadrature {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        if !(spec.t_cut > 4.0) || spec.tail_points < 4 || spec.nodes_per_panel < 2 || !(spec.panel_width > 0.0) {
            return Err(Error::InvalidArgument("invalid quadrature specification".into()));
        }
        let degree = heat_degree(spec.t_cut, spec.degree_tol);
        let weights = panel_weights(spec.t_cut, spec.panel_width, spec.nodes_per_panel, degree);
        let coarse_weights = panel_weights(spec.t_cut, 2.0 * spec.panel_width, spec.nodes_per_panel, degree);
        let tail_times = super::log_grid(spec.t_cut / 4.0, spec.t_cut, spec.tail_points);
        let tail_coeffs = tail_times.iter().map(|&t| heat_chebyshev_coefficients(t, degree)).collect();
        Ok(RieszQuadrature { spec, degree, weights, coarse_weights, tail_times, tail_coeffs })
    }

    /// Interior weights for a smaller cutoff `T' ≤ T`.
    pub fn weights_up_to(&self, t: f64) -> Vec<f64> {
        panel_weights(t, self.spec.panel_width, self.spec.nodes_per_panel, self.degree)
    }

    /// Evaluates the integral of a kernel whose Chebyshev moment vector is `moments`.
    pub fn integrate(&self, moments: &[f64]) -> QuadratureValue {
        let dot = |w: &[f64]| w.iter().zip(moments).map(|(a, b)| a * b).sum::<f64>();
        let interior = dot(&self.weights);
        let coarse = dot(&self.coarse_weights);
        let samples: Vec<f64> = self.tail_coeffs.iter().map(|c| dot(c)).collect();
        let tail3 = power_tail(&self.tail_times, &samples, 3, self.spec.t_cut);
        let tail2 = power_tail(&self.tail_times, &samples, 2, self.spec.t_cut);
        let value = interior + tail3.0;
        let error = (interior - coarse).abs() + (tail3.0 - tail2.0).abs() + tail3.1;
        QuadratureValue { value, interior, tail: tail3.0, error }
    }
}

/// Least-squares fit `g(t) ≈ Σ_{i<terms} a_i t^{−(3/2+i)}` on the samples and the
/// resulting `(1/√π)∫_T^∞ g(t) t^{−1/2} dt`, with the fit residual propagated.
fn power_tail(ts: &[f64], gs: &[f64], terms: usize, t_cut: f64) -> (f64, f64) {
    let n = ts.len();
    let scale = gs.iter().map(|g| g.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let a = DMatrix::from_fn(n, terms, |r, c| (ts[r] / t_cut).powf(-(1.5 + c as f64)));
    let b = DVector::from_iterator(n, gs.iter().copied());
    let svd = a.clone().svd(true, true);
    let coef = match svd.solve(&b, 1e-14) {
        Ok(c) => c,
        Err(_) => return (0.0, scale * t_cut.sqrt()),
    };
    let resid = (&a * &coef - &b).amax();
    let mut tail = 0.0;
    for (i, c) in coef.iter().enumerate() {
        let p = 1.0 + i as f64;
        tail += c * t_cut.powf(0.5) / p;
    }
    let tail = tail / PI.sqrt();
    let resid_tail = resid * 2.0 * t_cut.sqrt() / PI.sqrt();
    (tail, resid_tail)
}

/// One quadrature evaluation split into its parts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureValue {
    pub value: f64,
    pub interior: f64,
    pub tail: f64,
    pub error: f64,
}

/// A Riesz kernel value with its error estimate and, when `C_lev` is known, the a-priori tail bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RieszValue {
    pub value: Complex64,
    pub error: f64,
    pub tail: f64,
    pub tail_bound: Option<f64>,
}

struct AnchorData {
    comb: AnchorComb,
    table: MomentTable,
    index: HashMap<VertexId, usize>,
}

/// Evaluates Riesz kernels on a tree through per-anchor combs and moment tables.
pub struct RieszEvaluator<'a> {
    pub tree: &'a FlowTree,
    pub quadrature: RieszQuadrature,
    anchors: HashMap<VertexId, AnchorData>,
}

impl<'a> RieszEvaluator<'a> {
    pub fn new(tree: &'a FlowTree, spec: QuadratureSpec) -> Result<Self> {
        Ok(RieszEvaluator { tree, quadrature: RieszQuadrature::new(spec)?, anchors: HashMap::new() })
    }

    /// Prepares moment tables at anchor `y` for first arguments `xs` (and their parents).
    pub fn prepare(&mut self, y: VertexId, xs: &[VertexId]) -> Result<()> {
        let data = build_anchor(self.tree, y, xs, self.quadrature.degree)?;
        self.anchors.insert(y, data);
        Ok(())
    }

    /// Prepares every anchor in `ys` for the first arguments `xs`, in parallel.
    pub fn prepare_all(&mut self, ys: &[VertexId], xs: &[VertexId]) -> Result<()> {
        let degree = self.quadrature.degree;
        let tree = self.tree;
        let built: Vec<(VertexId, Result<AnchorData>)> =
            ys.par_iter().map(|&y| (y, build_anchor(tree, y, xs, degree))).collect();
        for (y, d) in built {
            self.anchors.insert(y, d?);
        }
        Ok(())
    }

    /// Chebyshev moments of `K_{∇ T_k}(x, y)`.
    pub fn gradient_moments(&self, x: VertexId, y: VertexId) -> Result<Vec<f64>> {
        let w = &self.tree.window;
        let data = self
            .anchors
            .get(&y)
            .ok_or_else(|| Error::InvalidArgument(format!("anchor {} not prepared", w.label(y))))?;
        let px = w
            .pred(x)
            .ok_or_else(|| Error::InsufficientMargin { vertex: w.label(x).to_string(), radius: 1 })?;
        let row = |v: VertexId| -> Result<usize> {
            let c = data
                .comb
                .project(w, y, v)
                .ok_or_else(|| Error::InsufficientMargin { vertex: w.label(v).to_string(), radius: data.comb.radius })?;
            let i = *data
                .index
                .get(&c)
                .ok_or_else(|| Error::InvalidArgument(format!("vertex {} not prepared at this anchor", w.label(v))))?;
            if !data.table.exact[i] {
                return Err(Error::InsufficientMargin { vertex: w.label(v).to_string(), radius: data.comb.radius });
            }
            Ok(i)
        };
        let (i, j) = (row(x)?, row(px)?);
        let inv = 1.0 / data.table.anchor_mass;
        Ok(data.table.values[i].iter().zip(&data.table.values[j]).map(|(a, b)| (a - b) * inv).collect())
    }

    /// `K_𝓡(x, y)`.
    pub fn value(&self, x: VertexId, y: VertexId) -> Result<RieszValue> {
        let mu = self.gradient_moments(x, y)?;
        let q = self.quadrature.integrate(&mu);
        let my = self.tree.measure.value_f64(y);
        Ok(RieszValue {
            value: Complex64::new(q.value, 0.0),
            error: q.error,
            tail: q.tail,
            tail_bound: self.quadrature.spec.tail_bound(self.quadrature.spec.t_cut, my),
        })
    }

    /// `K_𝓡(x,y) − conj K_𝓡(y,x)`, integrated as a single kernel.
    pub fn skew(&self, x: VertexId, y: VertexId) -> Result<RieszValue> {
        let a = self.gradient_moments(x, y)?;
        let b = self.gradient_moments(y, x)?;
        let mu: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
        let q = self.quadrature.integrate(&mu);
        Ok(RieszValue { value: Complex64::new(q.value, 0.0), error: q.error, tail: q.tail, tail_bound: None })
    }

    /// Interior integral up to `t`, with the same moments (the truncated Riesz kernel).
    pub fn truncated_value(&self, x: VertexId, y: VertexId, weights: &[f64]) -> Result<f64> {
        let mu = self.gradient_moments(x, y)?;
        Ok(weights.iter().zip(&mu).map(|(a, b)| a * b).sum())
    }
}

fn build_anchor(tree: &FlowTree, y: VertexId, xs: &[VertexId], degree: usize) -> Result<AnchorData> {
    let w = &tree.window;
    let reach = xs.iter().map(|&x| w.distance(x, y) + 1).max().unwrap_or(1);
    let radius = (degree + reach) / 2 + 6;
    let comb = anchor_comb(tree, y, radius)?;
    let mut probes: Vec<VertexId> = Vec::new();
    for &x in xs {
        let mut vs = vec![x];
        if let Some(p) = w.pred(x) {
            vs.push(p);
        }
        for v in vs {
            if let Some(c) = comb.project(w, y, v) {
                probes.push(c);
            }
        }
    }
    probes.sort_unstable();
    probes.dedup();
    let fast = FastAveraging::new(&comb.tree);
    let table = fast.moments(comb.anchor(), degree, &probes);
    let index = probes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    Ok(AnchorData { comb, table, index })
}

/// Compares quadrature skew parts with the closed form at every pair of `set`
/// within distance `max_distance`; rows are `(x, y, d, quadrature, closed, deviation, error)`.
pub fn riesz_skew_check(tree: &FlowTree, set: &[VertexId], max_distance: usize, spec: QuadratureSpec) -> Result<EstimateReport> {
    let w = &tree.window;
    let mut ev = RieszEvaluator::new(tree, spec)?;
    ev.prepare_all(set, set)?;
    let mut rep = EstimateReport::new(
        "riesz-skew-check",
        &["x", "y", "distance", "quadrature", "closed_form", "deviation", "error_estimate"],
    );
    let mut max_dev: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    for &x in set {
        for &y in set {
            let d = w.distance(x, y);
            if d > max_distance {
                continue;
            }
            let q = ev.skew(x, y)?;
            let c = riesz_skew_closed(tree, x, y);
            let dev = (q.value - c).norm();
            max_dev = max_dev.max(dev);
            max_err = max_err.max(q.error);
            rep.push(vec![x as f64, y as f64, d as f64, q.value.re, c.re, dev, q.error]);
        }
    }
    rep.meta("max_deviation", max_dev);
    rep.meta("max_error_estimate", max_err);
    rep.meta("pairs", rep.rows.len());
    rep.meta("degree", ev.quadrature.degree);
    rep.meta("quadrature", &ev.quadrature.spec);
    rep.meta("window_vertices", w.len());
    Ok(rep)
}

/// Partial sums `Σ_{x ≤ x₁, d(x,x₁) ≤ D} |K_{𝓡−𝓡*}(x, x₁)| m(x)` from the closed
/// form, against the harmonic numbers `H_{D+1}`. The descendants of `x₁` at each
/// depth carry total mass `m(x₁)` by the flow equation, so only the descendant
/// chain of `x₁` has to lie in the window.
pub fn divergence_probe(tree: &FlowTree, x1: VertexId, d_grid: &[usize]) -> Result<EstimateReport> {
    let w = &tree.window;
    let d_max = d_grid.iter().copied().max().unwrap_or(0);
    let depth = descendant_depth(w, x1);
    if depth < d_max {
        return Err(Error::InsufficientMargin { vertex: w.label(x1).to_string(), radius: d_max });
    }
    let mut rep = EstimateReport::new("divergence", &["D", "partial_sum", "harmonic", "ratio"]);
    for &d in d_grid {
        let s: f64 = (1..=d as i64).map(|n| hilbert_skew(-n).abs()).sum();
        let h: f64 = (0..=d).map(|n| 1.0 / (n as f64 + 1.0)).sum();
        rep.push(vec![d as f64, s, h, s / h]);
    }
    rep.meta("anchor", w.label(x1));
    rep.meta("parent_branching", w.pred(x1).map(|p| w.succ(p).len()));
    Ok(rep)
}

/// Length of the longest descendant chain of `v` inside the window.
pub fn descendant_depth(w: &TreeWindow, v: VertexId) -> usize {
    let mut best = 0;
    let mut stack = vec![(v, 0usize)];
    while let Some((u, d)) = stack.pop() {
        best = best.max(d);
        for &c in w.succ(u) {
            stack.push((c, d + 1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{path_window, DEFAULT_VERTEX_CAP};

    #[test]
    fn closed_form_arithmetic() {
        assert!((hilbert_skew(1) - 8.0 * 2f64.sqrt() / (3.0 * PI)).abs() < 1e-15);
        assert!((hilbert_skew(-2) + 16.0 * 2f64.sqrt() / (15.0 * PI)).abs() < 1e-15);
        let (tree, o) = crate::tree::homogeneous_ball_window(2, 3, 4, DEFAULT_VERTEX_CAP).unwrap();
        let w = &tree.window;
        let c = w.succ(o)[0];
        let g = w.succ(c)[0];
        let sib = w.succ(o)[1];
        assert_eq!(riesz_skew_closed(&tree, c, sib), Complex64::new(0.0, 0.0));
        let v = riesz_skew_closed(&tree, g, o);
        assert!((v.re - hilbert_skew(-2)).abs() < 1e-15);
        for x in w.ball(o, 3) {
            for y in w.ball(o, 3) {
                let a = riesz_skew_closed(&tree, x, y);
                let b = riesz_skew_closed(&tree, y, x);
                assert!((a + b.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn integers_skew_matches_closed_form() {
        let spec = QuadratureSpec { t_cut: 1024.0, ..Default::default() };
        let deg = heat_degree(spec.t_cut, spec.degree_tol);
        let len = deg + 40;
        let tree = path_window(len, 0).unwrap();
        let y = deg / 2 + 20;
        let set: Vec<VertexId> = (y - 2..=y + 2).collect();
        let rep = riesz_skew_check(&tree, &set, 4, spec).unwrap();
        let dev = rep.column("deviation").unwrap();
        assert!(dev.iter().all(|d| *d < 1e-6), "{dev:?}");
    }

    #[test]
    fn divergence_increments_near_log_two() {
        let tree = path_window(200, 0).unwrap();
        let rep = divergence_probe(&tree, 0, &[10, 16, 32, 64, 128]).unwrap();
        let s = rep.column("partial_sum").unwrap();
        for i in 1..4 {
            let inc = s[i + 1] - s[i];
            assert!((inc / 2f64.ln() - 1.0).abs() < 0.25);
        }
        let r = rep.column("ratio").unwrap()[0];
        assert!((0.5..=2.0).contains(&r));
    }
}
