//! Heat semigroup kernels, their gradients, level sums and weighted sums.

use super::{fit_line, sample_anchors, EstimateReport};
use crate::cheb::FastAveraging;
use crate::error::{Error, Result};
use crate::ops::KernelColumn;
use crate::quotient::{anchor_comb, AnchorComb};
use crate::special::{heat_chebyshev_coefficients, heat_chebyshev_tail, heat_degree};
use crate::tree::{homogeneous_ball_window, FlowTree, VertexId, DEFAULT_VERTEX_CAP};
use rayon::prelude::*;
use serde::Serialize;

/// Default tail tolerance for heat Chebyshev degrees.
pub const HEAT_TOL: f64 = 1e-15;

/// Which side of the kernel carries the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GradSide {
    /// `K(x,y) − K(𝔭(x),y)`, the kernel of `∇e^{−t𝓛}`.
    X,
    /// `K(x,y) − K(x,𝔭(y))`, the kernel of `e^{−t𝓛}∇*`.
    Y,
}

/// The four heat operators whose weighted column sums are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HeatVariant {
    /// `e^{−t𝓛}`.
    Heat,
    /// `∇e^{−t𝓛}`.
    GradX,
    /// `e^{−t𝓛}∇*`.
    GradY,
    /// `∇e^{−t𝓛}∇*`.
    GradBoth,
}

impl HeatVariant {
    pub const ALL: [HeatVariant; 4] = [HeatVariant::Heat, HeatVariant::GradX, HeatVariant::GradY, HeatVariant::GradBoth];

    pub fn name(self) -> &'static str {
        match self {
            HeatVariant::Heat => "heat",
            HeatVariant::GradX => "grad_heat",
            HeatVariant::GradY => "heat_grad_adjoint",
            HeatVariant::GradBoth => "grad_heat_grad_adjoint",
        }
    }

    /// Expected power of `t` in the decay of the weighted sums.
    pub fn rate(self) -> f64 {
        match self {
            HeatVariant::Heat => 0.0,
            HeatVariant::GradX | HeatVariant::GradY => -0.5,
            HeatVariant::GradBoth => -1.0,
        }
    }

    fn right_gradient(self) -> bool {
        matches!(self, HeatVariant::GradY | HeatVariant::GradBoth)
    }

    fn left_gradient(self) -> bool {
        matches!(self, HeatVariant::GradX | HeatVariant::GradBoth)
    }

    /// Extra distance the support of the column reaches beyond the heat degree.
    fn reach(self) -> usize {
        self.right_gradient() as usize + self.left_gradient() as usize
    }
}

/// Dense column of a heat variant on a compressed structure, with its exactness mask.
///
/// The column is `p(𝓛) g` where `g = 𝟙_y/m(y)` for the plain variants and
/// `g = 𝟙_y/m(y) − 𝟙_{𝔭y}/m(𝔭y)` when the right gradient is present, followed by
/// `∇` in the first variable when the left gradient is present.
pub fn heat_variant_dense(
    fast: &FastAveraging,
    y: VertexId,
    t: f64,
    degree: usize,
    variant: HeatVariant,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = fast.len();
    let mass = fast.mass();
    let mut init = vec![0.0; n];
    init[y] = 1.0 / mass[y];
    if variant.right_gradient() {
        let p = fast.pred(y).ok_or_else(|| Error::InsufficientMargin { vertex: format!("#{y}"), radius: 1 })?;
        init[p] = -1.0 / mass[p];
    }
    let coeffs = heat_chebyshev_coefficients(t, degree);
    let mut acc = vec![0.0; n];
    let mut exact = fast.chebyshev_sweep_from(&init, degree, |k, u| {
        let c = coeffs[k];
        for (a, &x) in acc.iter_mut().zip(u) {
            *a += c * x;
        }
    });
    if variant.left_gradient() {
        let mut grad = vec![0.0; n];
        let mut gexact = vec![false; n];
        for v in 0..n {
            match fast.pred(v) {
                Some(p) => {
                    grad[v] = acc[v] - acc[p];
                    gexact[v] = exact[v] && exact[p];
                }
                None => {
                    grad[v] = acc[v];
                    gexact[v] = false;
                }
            }
        }
        acc = grad;
        exact = gexact;
    }
    Ok((acc, exact))
}

fn check_margin(tree: &FlowTree, y: VertexId, radius: usize) -> Result<()> {
    let safe = tree.window.safe_region(radius);
    if safe[y] {
        Ok(())
    } else {
        Err(Error::InsufficientMargin { vertex: tree.window.label(y).to_string(), radius })
    }
}

fn certified_column(tree: &FlowTree, y: VertexId, t: f64, degree: usize, variant: HeatVariant) -> Result<KernelColumn<f64>> {
    let fast = FastAveraging::new(tree);
    let (values, exact) = heat_variant_dense(&fast, y, t, degree, variant)?;
    let tail = heat_chebyshev_tail(t, degree);
    let mass = fast.mass();
    let min_mass = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(x, _)| {
            let mut m = mass[x];
            if let Some(p) = fast.pred(x).filter(|_| variant.left_gradient()) {
                m = m.min(mass[p]);
            }
            m
        })
        .fold(f64::INFINITY, f64::min);
    let mut ym = mass[y];
    if variant.right_gradient() {
        if let Some(p) = fast.pred(y) {
            ym = ym.min(mass[p]);
        }
    }
    let factor = (1 + variant.left_gradient() as usize) * (1 + variant.right_gradient() as usize);
    let err = if tail == 0.0 { 0.0 } else { factor as f64 * tail / (min_mass * ym).sqrt() };
    Ok(KernelColumn::from_dense(y, values, exact, err))
}

/// Certified column `x ↦ K_{e^{−t𝓛}}(x, y)`; the degree defaults to the one
/// whose tail falls below [`HEAT_TOL`].
pub fn heat_kernel_column(tree: &FlowTree, t: f64, y: VertexId, degree: Option<usize>) -> Result<KernelColumn<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("heat time must be non-negative".into()));
    }
    let degree = degree.unwrap_or_else(|| heat_degree(t, HEAT_TOL));
    check_margin(tree, y, degree)?;
    certified_column(tree, y, t, degree, HeatVariant::Heat)
}

/// Certified gradient heat column on the chosen side.
pub fn grad_heat_kernel_column(
    tree: &FlowTree,
    t: f64,
    y: VertexId,
    degree: Option<usize>,
    side: GradSide,
) -> Result<KernelColumn<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("heat time must be non-negative".into()));
    }
    let degree = degree.unwrap_or_else(|| heat_degree(t, HEAT_TOL));
    check_margin(tree, y, degree + 1)?;
    let variant = match side {
        GradSide::X => HeatVariant::GradX,
        GradSide::Y => HeatVariant::GradY,
    };
    certified_column(tree, y, t, degree, variant)
}

/// Heat variant values on the comb of an anchor, with the comb and the exactness mask.
pub struct CombColumn {
    pub comb: AnchorComb,
    pub values: Vec<f64>,
    pub exact: Vec<bool>,
    pub degree: usize,
}

impl CombColumn {
    /// Builds the comb of `y` wide enough that the column never meets its boundary.
    pub fn new(tree: &FlowTree, y: VertexId, t: f64, variant: HeatVariant, tol: f64) -> Result<Self> {
        let degree = heat_degree(t, tol);
        let comb = anchor_comb(tree, y, degree + variant.reach() + 2)?;
        let fast = FastAveraging::new(&comb.tree);
        let (values, exact) = heat_variant_dense(&fast, comb.anchor(), t, degree, variant)?;
        Ok(CombColumn { comb, values, exact, degree })
    }

    /// `Σ_x w(d(x,y)) |K(x,y)| m(x)` over the source tree, with a flag raised when
    /// a nonzero value sits at an uncertified comb vertex.
    pub fn weighted_sum(&self, w: impl Fn(usize) -> f64) -> (f64, bool) {
        let cw = &self.comb.tree.window;
        let dist = cw.distances_from(self.comb.anchor());
        let mass = self.comb.tree.masses_f64();
        let mut total = 0.0;
        let mut truncated = false;
        for (v, &k) in self.values.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            if !self.exact[v] {
                truncated |= k.abs() > 1e-300;
                continue;
            }
            total += w(dist[v]) * k.abs() * mass[v];
        }
        (total, truncated)
    }

    /// Per-level sums `Σ_{ℓ(x)=l} |K(x,y)| m(x)`, keyed by level, with the truncation flag.
    pub fn level_sums(&self) -> (Vec<(i64, f64)>, bool) {
        let cw = &self.comb.tree.window;
        let mass = self.comb.tree.masses_f64();
        let mut sums = std::collections::BTreeMap::new();
        let mut truncated = false;
        for (v, &k) in self.values.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            if !self.exact[v] {
                truncated = true;
                continue;
            }
            *sums.entry(cw.level(v)).or_insert(0.0) += k.abs() * mass[v];
        }
        (sums.into_iter().collect(), truncated)
    }
}

/// Level-sum estimate `max_l Σ_{ℓ(z)=l} |K_{∇e^{−t𝓛}}(x,z)| m(z)` in both
/// orientations, sup over anchors, with slope fits against `log(1+t)`.
pub fn level_sum_estimate(
    tree: &FlowTree,
    anchors: &[VertexId],
    t_grid: &[f64],
    level: Option<i64>,
) -> Result<EstimateReport> {
    let anchors = sample_anchors(&tree.window, anchors);
    let mut rep = EstimateReport::new("level-sum", &["t", "row_sum", "column_sum", "truncated"]);
    let rows: Vec<Result<Vec<f64>>> = t_grid
        .par_iter()
        .map(|&t| {
            let mut best = [0.0f64; 2];
            let mut truncated = false;
            for &x in &anchors {
                for (slot, variant) in [(0, HeatVariant::GradY), (1, HeatVariant::GradX)] {
                    let col = CombColumn::new(tree, x, t, variant, HEAT_TOL)?;
                    let (sums, tr) = col.level_sums();
                    truncated |= tr;
                    let v = match level {
                        Some(l) => sums.iter().find(|(k, _)| *k == l).map(|(_, s)| *s).unwrap_or(0.0),
                        None => sums.iter().map(|(_, s)| *s).fold(0.0, f64::max),
                    };
                    best[slot] = best[slot].max(v);
                }
            }
            Ok(vec![t, best[0], best[1], truncated as u8 as f64])
        })
        .collect();
    for r in rows {
        rep.push(r?);
    }
    fit_against_one_plus_t(&mut rep, &["row_sum", "column_sum"]);
    rep.meta("anchors", anchors.len());
    rep.meta("level", level);
    rep.meta("window_vertices", tree.window.len());
    rep.meta("heat_tolerance", HEAT_TOL);
    rep.meta("fit_regressor", "log(1+t)");
    Ok(rep)
}

fn fit_against_one_plus_t(rep: &mut EstimateReport, keys: &[&str]) {
    let ts = rep.column("t").unwrap_or_default();
    let lx: Vec<f64> = ts.iter().map(|t| (1.0 + t).ln()).collect();
    for key in keys {
        if let Some(vals) = rep.column(key) {
            if vals.iter().all(|v| *v > 0.0) {
                let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
                rep.fits.insert(key.to_string(), fit_line(&lx, &ly));
            }
        }
    }
}

/// Weighted sums `sup_y Σ_x e^{ε d(x,y)/√t} |K(x,y)| m(x)` for the four heat
/// variants on one tree, with slope fits against `log(1+t)`.
pub fn weighted_heat_sweep_tree(tree: &FlowTree, anchors: &[VertexId], epsilon: f64, t_grid: &[f64]) -> Result<EstimateReport> {
    let anchors = sample_anchors(&tree.window, anchors);
    let names: Vec<&str> = HeatVariant::ALL.iter().map(|v| v.name()).collect();
    let mut cols = vec!["t"];
    cols.extend(&names);
    cols.push("truncated");
    let mut rep = EstimateReport::new("weighted-sweep", &cols);
    let rows: Vec<Result<Vec<f64>>> = t_grid
        .par_iter()
        .map(|&t| {
            if t < 1.0 {
                return Err(Error::InvalidArgument("weighted heat estimates are stated for t ≥ 1".into()));
            }
            let mut row = vec![t];
            let mut truncated = false;
            for variant in HeatVariant::ALL {
                let mut best = 0.0f64;
                for &y in &anchors {
                    let col = CombColumn::new(tree, y, t, variant, HEAT_TOL)?;
                    let (s, tr) = col.weighted_sum(|d| (epsilon * d as f64 / t.sqrt()).exp());
                    truncated |= tr;
                    best = best.max(s);
                }
                row.push(best);
            }
            row.push(truncated as u8 as f64);
            Ok(row)
        })
        .collect();
    for r in rows {
        rep.push(r?);
    }
    fit_against_one_plus_t(&mut rep, &names[1..]);
    rep.meta("epsilon", epsilon);
    rep.meta("anchors", anchors.len());
    rep.meta("window_vertices", tree.window.len());
    rep.meta("heat_tolerance", HEAT_TOL);
    rep.meta("fit_regressor", "log(1+t)");
    Ok(rep)
}

/// The weighted heat sweep over homogeneous trees `𝕋_q` for every `q` in the grid.
/// Rows carry `q` as their first entry; fits are keyed `variant/q=…`.
pub fn weighted_heat_sweep(q_grid: &[usize], epsilon: f64, t_grid: &[f64]) -> Result<EstimateReport> {
    let t_max = t_grid.iter().cloned().fold(1.0, f64::max);
    let up = heat_degree(t_max, HEAT_TOL) + 8;
    let names: Vec<&str> = HeatVariant::ALL.iter().map(|v| v.name()).collect();
    let mut cols = vec!["q", "t"];
    cols.extend(&names);
    cols.push("truncated");
    let mut rep = EstimateReport::new("weighted-sweep", &cols);
    for &q in q_grid {
        let (tree, o) = homogeneous_ball_window(q, 1, up, DEFAULT_VERTEX_CAP)?;
        let mut anchors = tree.window.ball(o, 1);
        anchors.sort_unstable();
        let sub = weighted_heat_sweep_tree(&tree, &anchors, epsilon, t_grid)?;
        for row in &sub.rows {
            let mut r = vec![q as f64];
            r.extend(row);
            rep.push(r);
        }
        for (k, f) in sub.fits {
            rep.fits.insert(format!("{k}/q={q}"), f);
        }
    }
    rep.meta("epsilon", epsilon);
    rep.meta("q_grid", q_grid);
    rep.meta("t_grid", t_grid);
    rep.meta("heat_tolerance", HEAT_TOL);
    rep.meta("fit_regressor", "log(1+t)");
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::column_pairing_with_constants;
    use crate::tree::{path_window, ratio_ball_window, chain_fibonacci, RatioProfile};
    use crate::zline::z_heat_kernel;

    #[test]
    fn zero_time_is_identity() {
        let (tree, o) = homogeneous_ball_window(2, 3, 5, DEFAULT_VERTEX_CAP).unwrap();
        let col = heat_kernel_column(&tree, 0.0, o, None).unwrap();
        assert_eq!(col.entries, vec![(o, 1.0)]);
        let g = grad_heat_kernel_column(&tree, 0.0, o, None, GradSide::X).unwrap();
        let p = tree.window.pred(o).unwrap();
        let c = tree.window.succ(o)[0];
        assert_eq!(g.get(o), 1.0);
        assert_eq!(g.get(c), -1.0);
        assert_eq!(g.get(p), 0.0);
    }

    #[test]
    fn integers_match_bessel_oracle() {
        let tree = path_window(81, 40).unwrap();
        let y = 40;
        let col = heat_kernel_column(&tree, 1.0, y, None).unwrap();
        let oracle = z_heat_kernel(1.0, 20);
        for n in -10i64..=10 {
            let x = (y as i64 + n) as usize;
            assert!((col.get(x) - oracle[n.unsigned_abs() as usize]).abs() < 1e-14 + col.err_bound);
        }
        let mass = column_pairing_with_constants(&tree, &col).unwrap();
        assert!((mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_pairs_to_zero_and_positivity() {
        let p = RatioProfile::golden();
        let (tree, o) = ratio_ball_window(&p, chain_fibonacci, 14, 20, DEFAULT_VERTEX_CAP).unwrap();
        let col = heat_kernel_column(&tree, 0.5, o, Some(10)).unwrap();
        for (_, v) in &col.entries {
            assert!(*v >= -col.err_bound - 1e-15);
        }
        let g = grad_heat_kernel_column(&tree, 0.5, o, Some(10), GradSide::X).unwrap();
        let s = column_pairing_with_constants(&tree, &g).unwrap();
        assert!(s.abs() < 1e-12, "{s}");
    }

    #[test]
    fn comb_column_matches_window_column() {
        let (tree, o) = homogeneous_ball_window(2, 9, 12, DEFAULT_VERTEX_CAP).unwrap();
        let t = 0.7;
        let win = grad_heat_kernel_column(&tree, t, o, Some(7), GradSide::Y).unwrap();
        let comb = anchor_comb(&tree, o, 10).unwrap();
        let fast = FastAveraging::new(&comb.tree);
        let (vals, exact) = heat_variant_dense(&fast, comb.anchor(), t, 7, HeatVariant::GradY).unwrap();
        for x in tree.window.ball(o, 6) {
            let c = comb.project(&tree.window, o, x).unwrap();
            assert!(exact[c]);
            assert!((vals[c] - win.get(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_sums_decay() {
        let (tree, o) = homogeneous_ball_window(2, 1, 70, DEFAULT_VERTEX_CAP).unwrap();
        let s1 = CombColumn::new(&tree, o, 1.0, HeatVariant::GradX, HEAT_TOL).unwrap().weighted_sum(|_| 1.0);
        let s16 = CombColumn::new(&tree, o, 16.0, HeatVariant::GradX, HEAT_TOL).unwrap().weighted_sum(|_| 1.0);
        assert!(!s1.1 && !s16.1);
        assert!(s16.0 < s1.0);
    }
}
