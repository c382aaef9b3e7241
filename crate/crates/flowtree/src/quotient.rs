//! Flow submersions between windows: validation, construction from uniformly
//! rational flows, lifting and fiber averaging, kernel transference, flow
//! rationalization, and the comb quotient attached to an anchor vertex.

use std::collections::BTreeMap;
use std::io::Write;

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::cheb::{kernel_column_general, ChebModel};
use crate::ops::{kernel_column_poly_masked, KernelColumn, NcPolynomial};
use crate::scalar::Scalar;
use crate::tree::{FlowMeasure, FlowTree, TreeWindow, VertexId};

/// Vertex map from a source window onto a target window.
#[derive(Clone, Debug)]
pub struct Submersion {
    /// `map[x]` is the image of source vertex `x`.
    pub map: Vec<VertexId>,
}

impl Submersion {
    /// Source vertices over each target vertex.
    pub fn fibers(&self, target_len: usize) -> Vec<Vec<VertexId>> {
        let mut out = vec![Vec::new(); target_len];
        for (x, &z) in self.map.iter().enumerate() {
            out[z].push(x);
        }
        out
    }

    /// Writes `source_id,target_id` rows.
    pub fn write_csv(&self, source: &TreeWindow, target: &TreeWindow, out: &mut impl Write) -> Result<()> {
        writeln!(out, "source_id,target_id")?;
        for (x, &z) in self.map.iter().enumerate() {
            writeln!(out, "{},{}", source.label(x), target.label(z))?;
        }
        Ok(())
    }
}

/// A violated submersion axiom with a witness vertex of the source.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Violation {
    pub axiom: String,
    pub witness: String,
}

/// Outcome of [`validate_submersion`].
#[derive(Clone, Debug, Serialize)]
pub struct SubmersionReport {
    pub level_shift: Option<i64>,
    pub checked_vertices: usize,
    pub violations: Vec<Violation>,
}

impl SubmersionReport {
    /// True when no axiom is violated.
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

enum Masses<'a> {
    Exact(&'a [BigRational], &'a [BigRational]),
    Float(Vec<f64>, Vec<f64>),
}

/// Checks predecessor and successor compatibility, constant level shift, and
/// the flow compatibility of fiber masses at every vertex whose predecessor is complete.
pub fn validate_submersion(source: &FlowTree, target: &FlowTree, s: &Submersion) -> SubmersionReport {
    let (sw, tw) = (&source.window, &target.window);
    let mut violations = Vec::new();
    let mut push = |axiom: &str, x: VertexId| {
        violations.push(Violation { axiom: axiom.to_string(), witness: sw.label(x).to_string() })
    };
    if s.map.len() != sw.len() {
        return SubmersionReport {
            level_shift: None,
            checked_vertices: 0,
            violations: vec![Violation { axiom: "map is not total".into(), witness: String::new() }],
        };
    }
    let shift = tw.level(s.map[0]) - sw.level(0);
    for x in 0..sw.len() {
        let z = s.map[x];
        if z >= tw.len() {
            push("image outside target window", x);
            continue;
        }
        if tw.level(z) - sw.level(x) != shift {
            push("level shift is not constant", x);
        }
        if let Some(px) = sw.pred(x) {
            if tw.pred(z) != Some(s.map[px]) {
                push("predecessor compatibility", x);
            }
        }
        if sw.is_complete(x) {
            let images: std::collections::BTreeSet<VertexId> = sw.succ(x).iter().map(|&c| s.map[c]).collect();
            let targets: std::collections::BTreeSet<VertexId> = tw.succ(z).iter().copied().collect();
            let consistent = if tw.is_complete(z) { images == targets } else { images.is_subset(&targets) };
            if !consistent {
                push("successor compatibility", x);
            }
        }
    }
    let masses = match (&source.measure, &target.measure) {
        (FlowMeasure::Rational(a), FlowMeasure::Rational(b)) => Masses::Exact(a, b),
        _ => Masses::Float(source.masses_f64(), target.masses_f64()),
    };
    for px in 0..sw.len() {
        if !sw.is_complete(px) {
            continue;
        }
        let mut groups: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for &c in sw.succ(px) {
            groups.entry(s.map[c]).or_default().push(c);
        }
        for (z, members) in groups {
            let Some(pz) = tw.pred(z) else { continue };
            let ok = match &masses {
                Masses::Exact(m1, m2) => {
                    let fiber: BigRational = members.iter().map(|&c| m1[c].clone()).sum();
                    &m2[z] / &m2[pz] == fiber / &m1[px]
                }
                Masses::Float(m1, m2) => {
                    let fiber: f64 = members.iter().map(|&c| m1[c]).sum();
                    ((m2[z] / m2[pz]) - fiber / m1[px]).abs() <= 1e-12
                }
            };
            if !ok {
                push("flow compatibility of fiber masses", members[0]);
            }
        }
    }
    SubmersionReport { level_shift: Some(shift), checked_vertices: sw.len(), violations }
}

/// Ratio list `q·m(c)/m(z)` of a complete target vertex, checked against denominator `q`.
fn multiplicities(target: &FlowTree, z: VertexId, q: usize) -> Result<Vec<usize>> {
    let w = &target.window;
    let mut out = Vec::new();
    for &c in w.succ(z) {
        let k = scaled_ratio(target, c, z, q)?;
        out.push(k);
    }
    if w.is_complete(z) && out.iter().sum::<usize>() != q {
        return Err(Error::Threshold {
            vertex: w.label(z).to_string(),
            reason: format!("successor ratios do not sum to 1 with denominator {q}"),
        });
    }
    Ok(out)
}

fn scaled_ratio(target: &FlowTree, c: VertexId, z: VertexId, q: usize) -> Result<usize> {
    let label = target.window.label(z).to_string();
    let m = target.measure.as_rational().ok_or_else(|| Error::Threshold {
        vertex: label.clone(),
        reason: "non-rational ratio (float measure)".into(),
    })?;
    let r = (&m[c] / &m[z]) * BigRational::from_integer(BigInt::from(q));
    if !r.is_integer() {
        return Err(Error::Threshold { vertex: label, reason: format!("denominator does not divide {q}") });
    }
    let k = r.to_integer().to_usize().unwrap_or(0);
    if k == 0 {
        return Err(Error::Threshold { vertex: label, reason: "successor ratio below 1/q".into() });
    }
    Ok(k)
}

/// Builds a flow submersion from a window of the homogeneous tree `𝕋_q` with its
/// canonical flow onto a `q`-uniformly rational target, top-down through the
/// noninjective successor lists.  Over incomplete target vertices one source
/// successor is created per listed target successor.
pub fn build_submersion_rational(target: &FlowTree, q: usize, cap: usize) -> Result<(FlowTree, Submersion)> {
    let tw = &target.window;
    let mut pred: Vec<Option<VertexId>> = vec![None];
    let mut complete = vec![false];
    let mut labels = vec![tw.label(tw.apex()).to_string()];
    let mut map = vec![tw.apex()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut fiber_count = vec![0usize; tw.len()];
    fiber_count[tw.apex()] = 1;
    while let Some(x) = queue.pop_front() {
        let z = map[x];
        let kids = tw.succ(z);
        if kids.is_empty() {
            continue;
        }
        let mult = multiplicities(target, z, q)?;
        let slots: Vec<VertexId> = if tw.is_complete(z) {
            kids.iter().zip(&mult).flat_map(|(&c, &k)| std::iter::repeat(c).take(k)).collect()
        } else {
            kids.to_vec()
        };
        complete[x] = tw.is_complete(z);
        for (j, &c) in slots.iter().enumerate() {
            if pred.len() >= cap {
                return Err(Error::ResourceLimit { needed: pred.len() as u128 + 1, cap });
            }
            pred.push(Some(x));
            complete.push(false);
            fiber_count[c] += 1;
            labels.push(format!("{}#{}", tw.label(c), fiber_count[c]));
            map.push(c);
            queue.push_back(pred.len() - 1);
            let _ = j;
        }
    }
    let window = TreeWindow::from_preds(pred, complete, tw.apex_level(), Some(labels))?;
    let qr = BigRational::from_integer(BigInt::from(q));
    let m: Vec<BigRational> = (0..window.len()).map(|v| crate::scalar::rational_pow(&qr, window.level(v))).collect();
    let source = FlowTree::new(window, FlowMeasure::Rational(m))?;
    Ok((source, Submersion { map }))
}

/// Checks `Σ_{z ∈ π⁻¹{y}, z ≤ x̄} m₁(z) = m₂(y) m₁(x̄)/m₂(π x̄)` for every source vertex `x̄`
/// whose descendants are complete down to the window bottom, and every target
/// descendant `y` of `π x̄` at a level the source window fully covers.
pub fn check_fiber_masses(source: &FlowTree, target: &FlowTree, s: &Submersion) -> Result<usize> {
    let (sw, tw) = (&source.window, &target.window);
    let (m1, m2) = match (source.measure.as_rational(), target.measure.as_rational()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Backend("fiber-mass identity is checked exactly".into())),
    };
    let mut checked = 0;
    for xb in 0..sw.len() {
        if !sw.is_complete(xb) {
            continue;
        }
        let mut sub = vec![xb];
        let mut i = 0;
        let mut full_levels = i64::MAX;
        while i < sub.len() {
            let v = sub[i];
            if sw.is_complete(v) {
                sub.extend_from_slice(sw.succ(v));
            } else {
                full_levels = full_levels.min(sw.level(v));
            }
            i += 1;
        }
        let mut sums: BTreeMap<VertexId, BigRational> = BTreeMap::new();
        for &z in &sub {
            *sums.entry(s.map[z]).or_insert_with(BigRational::zero) += &m1[z];
        }
        let c = &m2[s.map[xb]] / &m1[xb];
        for (y, sum) in sums {
            if tw.level(y) + sw.level(xb) - tw.level(s.map[xb]) < full_levels {
                continue;
            }
            if sum * &c != m2[y] {
                return Err(Error::Submersion(format!(
                    "fiber mass identity fails for source {} and target {}",
                    sw.label(xb),
                    tw.label(y)
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Lifting `f ↦ f ∘ π`.
pub fn lift<S: Scalar>(s: &Submersion, f: &[S]) -> Vec<S> {
    s.map.iter().map(|&z| f[z].clone()).collect()
}

/// Fiber average below a source vertex `x̄`:
/// `g ↦ (m₂(πx̄)/m₁(x̄)) Σ_{z ∈ π⁻¹{y}, z ≤ x̄} g(z) m₁(z) / m₂(y)` on target descendants of `πx̄`.
pub fn fiber_average_below(
    source: &FlowTree,
    target: &FlowTree,
    s: &Submersion,
    xb: VertexId,
    g: &[BigRational],
) -> Result<BTreeMap<VertexId, BigRational>> {
    let sw = &source.window;
    let (m1, m2) = match (source.measure.as_rational(), target.measure.as_rational()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Backend("fiber averages are computed exactly".into())),
    };
    let c = &m2[s.map[xb]] / &m1[xb];
    let mut sub = vec![xb];
    let mut i = 0;
    while i < sub.len() {
        let v = sub[i];
        sub.extend_from_slice(sw.succ(v));
        i += 1;
    }
    let mut out: BTreeMap<VertexId, BigRational> = BTreeMap::new();
    for &z in &sub {
        *out.entry(s.map[z]).or_insert_with(BigRational::zero) += &g[z] * &m1[z];
    }
    for (y, v) in out.iter_mut() {
        *v = &*v * &c / &m2[*y];
    }
    Ok(out)
}

/// Transfers a source kernel column at `ȳ` to the target column at `π(ȳ)`:
/// `K̃(x, πȳ) = (1/m₂(x)) Σ_{z ∈ π⁻¹{x}} K(z, ȳ) m₁(z)`.  A target value is
/// certified when every source vertex of its fiber is certified.
pub fn fiber_average_kernel<S: Scalar>(
    source: &FlowTree,
    target: &FlowTree,
    s: &Submersion,
    column: &KernelColumn<S>,
) -> Result<KernelColumn<S>> {
    let n = target.window.len();
    let mut values = vec![S::zero(); n];
    let mut safe = vec![true; n];
    for z in 0..source.window.len() {
        let x = s.map[z];
        safe[x] &= column.safe[z];
    }
    for (z, k) in &column.entries {
        let x = s.map[*z];
        values[x] = values[x].clone() + k.clone() * source.measure.value::<S>(*z)?;
    }
    for (x, v) in values.iter_mut().enumerate() {
        if !v.is_zero() {
            *v = v.clone() * target.measure.inverse::<S>(x)?;
        }
    }
    let anchor = s.map[column.anchor];
    Ok(KernelColumn::from_dense(anchor, values, safe, column.err_bound))
}

/// Row form `K̃(πx̄, y) = (1/m₂(y)) Σ_{z ∈ π⁻¹{y}} K(x̄, z) m₁(z)` from source columns at the fiber of `y`.
pub fn fiber_average_row<S: Scalar>(
    source: &FlowTree,
    target: &FlowTree,
    y: VertexId,
    xb: VertexId,
    fiber_columns: &[KernelColumn<S>],
) -> Result<S> {
    let mut acc = S::zero();
    for col in fiber_columns {
        acc = acc + col.get(xb) * source.measure.value::<S>(col.anchor)?;
    }
    Ok(acc * target.measure.inverse::<S>(y)?)
}

/// One rationalized successor ratio.
#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub vertex: String,
    pub child_index: usize,
    pub ratio_num: u64,
    pub ratio_den: u64,
    pub error: f64,
    pub anchor: bool,
}

/// Output of [`rationalize_flow`].
#[derive(Clone, Debug)]
pub struct Rationalization {
    pub tree: FlowTree,
    pub rows: Vec<RatioRow>,
    pub max_off_anchor_error: f64,
    pub max_anchor_error: f64,
    /// Maximal branching among complete vertices.
    pub q0: usize,
}

impl Rationalization {
    /// Writes `vertex,child_index,ratio_num,ratio_den,error` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "vertex,child_index,ratio_num,ratio_den,error")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{:e}", r.vertex, r.child_index, r.ratio_num, r.ratio_den, r.error)?;
        }
        Ok(())
    }
}

fn exact_ratio(measure: &FlowMeasure, c: VertexId, x: VertexId) -> (BigRational, f64) {
    match measure {
        FlowMeasure::Rational(m) => {
            let r = &m[c] / &m[x];
            let f = r.to_f64().unwrap_or(f64::NAN);
            (r, f)
        }
        FlowMeasure::Float(m) => {
            let f = m[c] / m[x];
            (BigRational::from_float(f).unwrap_or_else(BigRational::zero), f)
        }
    }
}

/// Approximates every successor ratio by a multiple of `1/q`: non-anchor successors
/// of complete vertices get `⌊q r⌋/q`, the successor of maximal mass absorbs the
/// remainder, and listed successors of incomplete vertices get `max(⌊q r⌋, 1)/q`.
/// The new measure agrees with the old one at `root`.
pub fn rationalize_flow(tree: &FlowTree, q: usize, root: VertexId) -> Result<Rationalization> {
    let w = &tree.window;
    let q0 = w.max_branching();
    if q < q0.max(1) {
        let witness = (0..w.len()).find(|&v| w.is_complete(v) && w.succ(v).len() > q).unwrap_or(0);
        return Err(Error::Threshold {
            vertex: w.label(witness).to_string(),
            reason: format!("q = {q} is below the branching {}", w.succ(witness).len()),
        });
    }
    let qb = BigRational::from_integer(BigInt::from(q));
    let mut new_ratio: Vec<BigRational> = vec![BigRational::one(); w.len()];
    let mut rows = Vec::new();
    let mut max_off: f64 = 0.0;
    let mut max_anchor: f64 = 0.0;
    for x in 0..w.len() {
        let kids = w.succ(x);
        if kids.is_empty() {
            continue;
        }
        let rs: Vec<(BigRational, f64)> = kids.iter().map(|&c| exact_ratio(&tree.measure, c, x)).collect();
        let floors: Vec<u64> =
            rs.iter().map(|(r, _)| (r * &qb).floor().to_integer().to_u64().unwrap_or(0)).collect();
        if w.is_complete(x) {
            let mut anchor = 0;
            for i in 1..kids.len() {
                if rs[i].0 > rs[anchor].0 {
                    anchor = i;
                }
            }
            for (i, &f) in floors.iter().enumerate() {
                if i != anchor && f == 0 {
                    return Err(Error::Threshold {
                        vertex: w.label(x).to_string(),
                        reason: format!("successor ratio {:.6} is below 1/{q}", rs[i].1),
                    });
                }
            }
            let off: u64 = floors.iter().enumerate().filter(|(i, _)| *i != anchor).map(|(_, f)| f).sum();
            for (i, &c) in kids.iter().enumerate() {
                let num = if i == anchor { q as u64 - off } else { floors[i] };
                let wq = BigRational::new(BigInt::from(num), BigInt::from(q));
                let err = ((&wq - &rs[i].0).abs()).to_f64().unwrap_or(f64::NAN);
                if i == anchor {
                    max_anchor = max_anchor.max(err);
                } else {
                    max_off = max_off.max(err);
                }
                rows.push(RatioRow {
                    vertex: w.label(x).to_string(),
                    child_index: i,
                    ratio_num: num,
                    ratio_den: q as u64,
                    error: err,
                    anchor: i == anchor,
                });
                new_ratio[c] = wq;
            }
        } else {
            for (i, &c) in kids.iter().enumerate() {
                let num = floors[i].max(1);
                let wq = BigRational::new(BigInt::from(num), BigInt::from(q));
                let err = ((&wq - &rs[i].0).abs()).to_f64().unwrap_or(f64::NAN);
                max_off = max_off.max(err);
                rows.push(RatioRow {
                    vertex: w.label(x).to_string(),
                    child_index: i,
                    ratio_num: num,
                    ratio_den: q as u64,
                    error: err,
                    anchor: false,
                });
                new_ratio[c] = wq;
            }
        }
    }
    let root_mass = match &tree.measure {
        FlowMeasure::Rational(m) => m[root].clone(),
        FlowMeasure::Float(m) => BigRational::from_float(m[root])
            .ok_or_else(|| Error::NonPositiveMeasure(w.label(root).to_string()))?,
    };
    let mut apex_mass = root_mass;
    let mut cur = root;
    while let Some(p) = w.pred(cur) {
        apex_mass = apex_mass / &new_ratio[cur];
        cur = p;
    }
    let mut m = vec![BigRational::zero(); w.len()];
    for v in w.top_down() {
        m[v] = match w.pred(v) {
            None => apex_mass.clone(),
            Some(p) => &m[p] * &new_ratio[v],
        };
    }
    let out = FlowTree::new(w.clone(), FlowMeasure::Rational(m))?;
    Ok(Rationalization { tree: out, rows, max_off_anchor_error: max_off, max_anchor_error: max_anchor, q0 })
}

/// Operator whose kernel is compared in [`perturbation_probe`].
#[derive(Clone, Copy, Debug)]
pub enum ProbeOperator<'a> {
    Polynomial(&'a NcPolynomial<f64>),
    Model(&'a ChebModel),
}

impl ProbeOperator<'_> {
    fn column(&self, tree: &FlowTree, y: VertexId) -> Result<(Vec<Complex64>, Vec<bool>, f64)> {
        match self {
            ProbeOperator::Polynomial(p) => {
                let col = kernel_column_poly_masked(tree, p, y)?;
                let dense = col.dense().into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                Ok((dense, col.safe, col.err_bound))
            }
            ProbeOperator::Model(m) => {
                let col = kernel_column_general(tree, m, y);
                Ok((col.dense(), col.safe, col.err_bound))
            }
        }
    }
}

/// One line of the rationalization convergence table.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbationRow {
    pub q: usize,
    /// `max |K_q(x,y) − K_m(x,y)|` over certified pairs.
    pub max_deviation: f64,
    /// Sum of the two column certificates at the maximizing anchor.
    pub certificate: f64,
    pub max_ratio_error: f64,
    pub pairs: usize,
}

/// Rationalizes the flow for each `q` of an increasing grid and compares the
/// kernel columns at `anchors` with those of the original flow, at the vertices
/// certified for both windows.  The masses agree at `root`.
pub fn perturbation_probe(
    tree: &FlowTree,
    root: VertexId,
    q_grid: &[usize],
    op: ProbeOperator<'_>,
    anchors: &[VertexId],
) -> Result<Vec<PerturbationRow>> {
    if q_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument("the q-grid must be strictly increasing".into()));
    }
    let base: Vec<_> = anchors.iter().map(|&y| op.column(tree, y)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let rat = rationalize_flow(tree, q, root)?;
        let mut row = PerturbationRow {
            q,
            max_deviation: 0.0,
            certificate: 0.0,
            max_ratio_error: rat.max_off_anchor_error.max(rat.max_anchor_error),
            pairs: 0,
        };
        for (&y, (k_m, safe_m, err_m)) in anchors.iter().zip(&base) {
            let (k_q, safe_q, err_q) = op.column(&rat.tree, y)?;
            for x in 0..k_q.len() {
                if !(safe_m[x] && safe_q[x]) {
                    continue;
                }
                row.pairs += 1;
                let dev = (k_q[x] - k_m[x]).norm();
                if dev > row.max_deviation {
                    row.max_deviation = dev;
                }
            }
            row.certificate = row.certificate.max(err_m + err_q);
        }
        out.push(row);
    }
    Ok(out)
}

/// Writes `q,max_deviation,certificate,max_ratio_error,pairs` rows.
pub fn write_perturbation_csv(rows: &[PerturbationRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "q,max_deviation,certificate,max_ratio_error,pairs")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e},{:e},{}", r.q, r.max_deviation, r.certificate, r.max_ratio_error, r.pairs)?;
    }
    Ok(())
}

/// Quotient of a flow tree onto the comb of an anchor `y`: the ancestor line of
/// `y`, one constant-mass chain hanging from each ancestor (carrying the mass of
/// the side branches), and the descendant chain of `y`.
#[derive(Clone, Debug)]
pub struct AnchorComb {
    pub tree: FlowTree,
    /// `line[j]` is the comb vertex of `p^j(y)`.
    pub line: Vec<VertexId>,
    /// `hanging[j]` lists the chain below `p^j(y)` (depths `1, 2, …`), empty when its mass vanishes.
    pub hanging: Vec<Vec<VertexId>>,
    /// Descendant chain of `y` (depths `1, 2, …`).
    pub below: Vec<VertexId>,
    pub radius: usize,
}

impl AnchorComb {
    /// The comb anchor (image of `y`).
    pub fn anchor(&self) -> VertexId {
        self.line[0]
    }

    /// Image of a source vertex, when it lies within the comb radius.
    pub fn project(&self, source: &TreeWindow, y: VertexId, x: VertexId) -> Option<VertexId> {
        let c = source.confluent(x, y);
        let j = (source.level(c) - source.level(y)) as usize;
        let h = (source.level(c) - source.level(x)) as usize;
        if j + h > self.radius {
            return None;
        }
        match (j, h) {
            (_, 0) => self.line.get(j).copied(),
            (0, h) => self.below.get(h - 1).copied(),
            (j, h) => self.hanging.get(j).and_then(|chain| chain.get(h - 1)).copied(),
        }
    }
}

/// Builds the comb of radius `radius` around `y`, using the masses along the
/// ancestor chain of `y` (which must reach `radius` generations up).
pub fn anchor_comb(tree: &FlowTree, y: VertexId, radius: usize) -> Result<AnchorComb> {
    let w = &tree.window;
    let chain = w.ancestors(y);
    if chain.len() <= radius {
        return Err(Error::InsufficientMargin { vertex: w.label(y).to_string(), radius });
    }
    let chain = &chain[..=radius];
    let exact = tree.measure.as_rational();
    let fl = tree.masses_f64();
    let mut pred: Vec<Option<VertexId>> = Vec::new();
    let mut complete = Vec::new();
    let mut labels = Vec::new();
    let mut mass_exact: Vec<BigRational> = Vec::new();
    let mut mass_float: Vec<f64> = Vec::new();
    let mut push = |p: Option<VertexId>, done: bool, label: String, me: Option<BigRational>, mf: f64| {
        pred.push(p);
        complete.push(done);
        labels.push(label);
        if let Some(me) = me {
            mass_exact.push(me);
        }
        mass_float.push(mf);
        pred.len() - 1
    };
    let mut line = vec![0; radius + 1];
    let top = chain[radius];
    line[radius] = push(
        None,
        false,
        format!("line{radius}"),
        exact.map(|m| m[top].clone()),
        fl[top],
    );
    for j in (0..radius).rev() {
        let v = chain[j];
        line[j] = push(Some(line[j + 1]), true, format!("line{j}"), exact.map(|m| m[v].clone()), fl[v]);
    }
    let mut hanging = vec![Vec::new(); radius + 1];
    for j in 1..radius {
        let (a, b) = (chain[j], chain[j - 1]);
        let (me, mf) = match exact {
            Some(m) => {
                let d = &m[a] - &m[b];
                let f = d.to_f64().unwrap_or(0.0);
                (Some(d), f)
            }
            None => (None, fl[a] - fl[b]),
        };
        let vanishes = match &me {
            Some(d) => d.is_zero(),
            None => mf.abs() <= 1e-12 * fl[a],
        };
        if vanishes {
            continue;
        }
        let mut parent = line[j];
        for h in 1..=(radius - j) {
            let done = j + h < radius;
            let v = push(Some(parent), done, format!("hang{j}.{h}"), me.clone(), mf);
            hanging[j].push(v);
            parent = v;
        }
    }
    let mut below = Vec::new();
    let mut parent = line[0];
    for h in 1..=radius {
        let v = push(Some(parent), h < radius, format!("below{h}"), exact.map(|m| m[y].clone()), fl[y]);
        below.push(v);
        parent = v;
    }
    if radius == 0 {
        complete[line[0]] = false;
    }
    let top_level = w.level(top);
    let window = TreeWindow::from_preds(pred, complete, top_level, Some(labels))?;
    let measure = if exact.is_some() { FlowMeasure::Rational(mass_exact) } else { FlowMeasure::Float(mass_float) };
    let comb = FlowTree::new(window, measure)?;
    Ok(AnchorComb { tree: comb, line, hanging, below, radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{kernel_column_poly, NcPolynomial};
    use crate::scalar::ratio;
    use crate::tree::{
        chain_fibonacci, homogeneous_ball_window, homogeneous_window, ratio_ball_window, RatioProfile,
        DEFAULT_VERTEX_CAP,
    };

    #[test]
    fn level_map_onto_integers_is_valid() {
        let src = homogeneous_window(2, 0, 4, 3, DEFAULT_VERTEX_CAP).unwrap();
        let tgt = crate::tree::path_window(8, 0).unwrap();
        let map: Vec<VertexId> = (0..src.window.len()).map(|v| (-src.window.level(v)) as usize).collect();
        let tgt = FlowTree::new(
            tgt.window.clone(),
            FlowMeasure::Rational(vec![ratio(1, 1); 8]),
        )
        .unwrap();
        let rep = validate_submersion(&src, &tgt, &Submersion { map });
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    #[test]
    fn identity_is_valid_and_swap_is_not() {
        let src = homogeneous_window(2, 0, 3, 1, DEFAULT_VERTEX_CAP).unwrap();
        let id = Submersion { map: (0..src.window.len()).collect() };
        assert!(validate_submersion(&src, &src, &id).is_valid());
        let target = crate::tree::parse_window(
            r#"{"vertices":[
            {"id":"r","pred":null,"measure":"1","complete":true},
            {"id":"a","pred":"r","measure":"3/4","complete":false},
            {"id":"b","pred":"r","measure":"1/4","complete":false}]}"#,
        )
        .unwrap();
        let source = crate::tree::parse_window(
            r#"{"vertices":[
            {"id":"r","pred":null,"measure":"1","complete":true},
            {"id":"a","pred":"r","measure":"3/4","complete":false},
            {"id":"b","pred":"r","measure":"1/4","complete":false}]}"#,
        )
        .unwrap();
        let swapped = Submersion { map: vec![0, 2, 1] };
        let rep = validate_submersion(&source, &target, &swapped);
        assert!(!rep.is_valid());
        assert_eq!(rep.violations[0].axiom, "flow compatibility of fiber masses");
    }

    #[test]
    fn rational_construction_multiplicities() {
        let target = crate::tree::parse_window(
            r#"{"vertices":[
            {"id":"r","pred":null,"measure":"1","complete":true},
            {"id":"a","pred":"r","measure":"3/4","complete":false},
            {"id":"b","pred":"r","measure":"1/4","complete":false}]}"#,
        )
        .unwrap();
        let (src, s) = build_submersion_rational(&target, 4, DEFAULT_VERTEX_CAP).unwrap();
        let fibers = s.fibers(3);
        assert_eq!(fibers[1].len(), 3);
        assert_eq!(fibers[2].len(), 1);
        assert!(validate_submersion(&src, &target, &s).is_valid());
        assert!(build_submersion_rational(&target, 3, DEFAULT_VERTEX_CAP).is_err());
    }

    #[test]
    fn rationalization_examples() {
        let exact = crate::tree::parse_window(
            r#"{"vertices":[
            {"id":"r","pred":null,"measure":"1","complete":true},
            {"id":"a","pred":"r","measure":"1/3","complete":false},
            {"id":"b","pred":"r","measure":"2/3","complete":false}]}"#,
        )
        .unwrap();
        let r = rationalize_flow(&exact, 3, 0).unwrap();
        assert_eq!(r.max_anchor_error, 0.0);
        assert_eq!(r.max_off_anchor_error, 0.0);
        let s = 1.0 / 2f64.sqrt();
        let text = format!(
            r#"{{"vertices":[
            {{"id":"r","pred":null,"measure":1.0,"complete":true}},
            {{"id":"a","pred":"r","measure":{s},"complete":false}},
            {{"id":"b","pred":"r","measure":{},"complete":false}}]}}"#,
            1.0 - s
        );
        let irr = crate::tree::parse_window(&text).unwrap();
        let r = rationalize_flow(&irr, 100, 0).unwrap();
        assert!(r.max_anchor_error <= 0.01 && r.max_off_anchor_error <= 0.01);
        let low = crate::tree::parse_window(
            r#"{"vertices":[
            {"id":"r","pred":null,"measure":1.0,"complete":true},
            {"id":"a","pred":"r","measure":0.3,"complete":false},
            {"id":"b","pred":"r","measure":0.7,"complete":false}]}"#,
        )
        .unwrap();
        assert!(matches!(rationalize_flow(&low, 2, 0), Err(Error::Threshold { .. })));
    }

    #[test]
    fn perturbation_probe_converges_for_golden_flow() {
        let (t, o) = crate::tree::ratio_ball_window(
            &crate::tree::RatioProfile::golden(),
            crate::tree::chain_fibonacci,
            5,
            8,
            DEFAULT_VERTEX_CAP,
        )
        .unwrap();
        let lap2 = NcPolynomial::<f64>::laplacian_polynomial(&[0.0, 0.0, 1.0]);
        let anchors = t.window.ball(o, 2);
        let rows = perturbation_probe(&t, o, &[8, 32, 128, 512], ProbeOperator::Polynomial(&lap2), &anchors).unwrap();
        assert!(rows.windows(2).all(|p| p[1].max_deviation <= p[0].max_deviation));
        assert!(rows.last().unwrap().max_deviation < rows[0].max_deviation);
        let heat = crate::cheb::cheb_approx(|l| Complex64::new((-l).exp(), 0.0), 4).unwrap();
        let rows = perturbation_probe(&t, o, &[8, 512], ProbeOperator::Model(&heat), &[o]).unwrap();
        assert!(rows.iter().all(|r| r.pairs > 0));
        assert!(rows[1].max_deviation < rows[0].max_deviation);
    }

    #[test]
    fn perturbation_probe_vanishes_on_rational_flow() {
        let (t, o) = homogeneous_ball_window(2, 4, 6, DEFAULT_VERTEX_CAP).unwrap();
        let lap2 = NcPolynomial::<f64>::laplacian_polynomial(&[0.0, 0.0, 1.0]);
        let rows = perturbation_probe(&t, o, &[2, 4], ProbeOperator::Polynomial(&lap2), &[o]).unwrap();
        assert!(rows.iter().all(|r| r.max_deviation == 0.0 && r.pairs > 0));
    }

    #[test]
    fn comb_reproduces_window_kernels() {
        let (t, o) = homogeneous_ball_window(2, 5, 8, DEFAULT_VERTEX_CAP).unwrap();
        let comb = anchor_comb(&t, o, 6).unwrap();
        let poly: NcPolynomial<BigRational> = NcPolynomial::laplacian().pow(2) * NcPolynomial::gradient();
        let direct = kernel_column_poly(&t, &poly, o).unwrap();
        let reduced = kernel_column_poly(&comb.tree, &poly, comb.anchor()).unwrap();
        for x in t.window.ball(o, 4) {
            let c = comb.project(&t.window, o, x).unwrap();
            assert_eq!(direct.get(x), reduced.get(c), "vertex {}", t.window.label(x));
        }
        let (g, og) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, 12, DEFAULT_VERTEX_CAP).unwrap();
        let comb = anchor_comb(&g, og, 8).unwrap();
        let poly: NcPolynomial<f64> = NcPolynomial::laplacian().pow(2);
        let direct = kernel_column_poly(&g, &poly, og).unwrap();
        let reduced = kernel_column_poly(&comb.tree, &poly, comb.anchor()).unwrap();
        for x in g.window.ball(og, 4) {
            let c = comb.project(&g.window, og, x).unwrap();
            assert!((direct.get(x) - reduced.get(c)).abs() < 1e-13);
        }
    }
}
