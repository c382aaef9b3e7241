//! Finite windows of trees with a root at infinity, flow measures on them, and
//! the safe-region bookkeeping that certifies finite-propagation computations.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Scalar};

/// Dense vertex index inside a [`TreeWindow`].
pub type VertexId = usize;

/// Default cap on the number of vertices a builder may allocate.
pub const DEFAULT_VERTEX_CAP: usize = 2_000_000;

/// A finite predecessor-closed fragment of a locally finite tree rooted at infinity.
#[derive(Clone, Debug)]
pub struct TreeWindow {
    pred: Vec<Option<VertexId>>,
    succ: Vec<Vec<VertexId>>,
    complete: Vec<bool>,
    level: Vec<i64>,
    labels: Vec<String>,
    apex: VertexId,
}

/// Numeric representation used by a [`FlowMeasure`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    Float,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(Backend::Rational),
            "float" => Ok(Backend::Float),
            other => Err(Error::InvalidArgument(format!("unknown backend {other:?}"))),
        }
    }
}

/// Positive vertex weights obeying the flow equation at complete vertices.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowMeasure {
    Rational(Vec<BigRational>),
    Float(Vec<f64>),
}

/// Relative tolerance of the flow equation for the float backend.
pub const FLOAT_FLOW_TOL: f64 = 1e-12;

impl TreeWindow {
    /// Assembles a window from predecessor links; successor order follows index order.
    pub fn from_preds(
        pred: Vec<Option<VertexId>>,
        complete: Vec<bool>,
        apex_level: i64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = pred.len();
        if n == 0 {
            return Err(Error::Schema("window has no vertices".into()));
        }
        if complete.len() != n {
            return Err(Error::Schema("completeness flags do not match vertex count".into()));
        }
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        if labels.len() != n {
            return Err(Error::Schema("label count does not match vertex count".into()));
        }
        let apexes: Vec<usize> = (0..n).filter(|&v| pred[v].is_none()).collect();
        if apexes.len() != 1 {
            if apexes.is_empty() {
                return Err(Error::Cycle("no apex vertex: every vertex has a predecessor".into()));
            }
            return Err(Error::Disconnected(format!(
                "{} vertices without predecessor ({} and {})",
                apexes.len(),
                labels[apexes[0]],
                labels[apexes[1]]
            )));
        }
        let apex = apexes[0];
        let mut succ = vec![Vec::new(); n];
        for (v, p) in pred.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::Schema(format!("vertex {} has unknown predecessor", labels[v])));
                }
                if p == v {
                    return Err(Error::Cycle(format!("vertex {} is its own predecessor", labels[v])));
                }
                succ[p].push(v);
            }
        }
        let mut level = vec![i64::MIN; n];
        level[apex] = apex_level;
        let mut queue = VecDeque::from([apex]);
        let mut seen = 1usize;
        while let Some(v) = queue.pop_front() {
            for &c in &succ[v] {
                level[c] = level[v] - 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            let bad = (0..n).find(|&v| level[v] == i64::MIN).unwrap_or(0);
            return Err(Error::Cycle(format!(
                "vertex {} does not reach the apex through predecessors",
                labels[bad]
            )));
        }
        Ok(TreeWindow { pred, succ, complete, level, labels, apex })
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.pred.len()
    }

    /// True when the window is empty (never, for validated windows).
    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    /// The unique vertex without predecessor.
    pub fn apex(&self) -> VertexId {
        self.apex
    }

    /// Predecessor of `v`.
    pub fn pred(&self, v: VertexId) -> Option<VertexId> {
        self.pred[v]
    }

    /// Ordered successors of `v` present in the window.
    pub fn succ(&self, v: VertexId) -> &[VertexId] {
        &self.succ[v]
    }

    /// Whether the successor list of `v` is exhaustive in the ambient tree.
    pub fn is_complete(&self, v: VertexId) -> bool {
        self.complete[v]
    }

    /// Level of `v`.
    pub fn level(&self, v: VertexId) -> i64 {
        self.level[v]
    }

    /// Level of the apex.
    pub fn apex_level(&self) -> i64 {
        self.level[self.apex]
    }

    /// Display label of `v`.
    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v]
    }

    /// Looks up a vertex by label.
    pub fn find(&self, label: &str) -> Option<VertexId> {
        self.labels.iter().position(|l| l == label)
    }

    /// Vertices in breadth-first order from the apex (parents before children).
    pub fn top_down(&self) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.len());
        out.push(self.apex);
        let mut i = 0;
        while i < out.len() {
            let v = out[i];
            out.extend_from_slice(&self.succ[v]);
            i += 1;
        }
        out
    }

    /// Neighbours of `v` inside the window.
    pub fn neighbours(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.pred[v].into_iter().chain(self.succ[v].iter().copied())
    }

    /// True when `v` has a neighbour outside the window.
    pub fn touches_boundary(&self, v: VertexId) -> bool {
        !self.complete[v] || self.pred[v].is_none()
    }

    /// The ancestor `p^k(v)` if it lies in the window.
    pub fn ancestor(&self, mut v: VertexId, k: usize) -> Option<VertexId> {
        for _ in 0..k {
            v = self.pred[v]?;
        }
        Some(v)
    }

    /// The ancestor chain of `v` starting with `v` itself.
    pub fn ancestors(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.pred[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Confluent (lowest common ancestor) of `x` and `y`.
    pub fn confluent(&self, mut x: VertexId, mut y: VertexId) -> VertexId {
        while self.level[x] < self.level[y] {
            x = self.pred[x].expect("level ordering");
        }
        while self.level[y] < self.level[x] {
            y = self.pred[y].expect("level ordering");
        }
        while x != y {
            x = self.pred[x].expect("common ancestor");
            y = self.pred[y].expect("common ancestor");
        }
        x
    }

    /// Graph distance between `x` and `y`.
    pub fn distance(&self, x: VertexId, y: VertexId) -> usize {
        let c = self.level[self.confluent(x, y)];
        ((c - self.level[x]) + (c - self.level[y])) as usize
    }

    /// True when `x` is a descendant of `y` (possibly equal).
    pub fn is_descendant(&self, x: VertexId, y: VertexId) -> bool {
        let dl = self.level[y] - self.level[x];
        dl >= 0 && self.ancestor(x, dl as usize) == Some(y)
    }

    /// Distances from `y` to every vertex, by breadth-first search.
    pub fn distances_from(&self, y: VertexId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[y] = 0;
        let mut queue = VecDeque::from([y]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for u in self.neighbours(v) {
                if dist[u] == usize::MAX {
                    dist[u] = d;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// The closed ball of radius `r` around `y` (restricted to the window).
    pub fn ball(&self, y: VertexId, r: usize) -> Vec<VertexId> {
        let dist = self.distances_from(y);
        (0..self.len()).filter(|&v| dist[v] <= r).collect()
    }

    /// Vertices where every word of length at most `radius` in the shift and
    /// its adjoint is evaluated exactly on arbitrary window-supported inputs.
    pub fn safe_region(&self, radius: usize) -> Vec<bool> {
        let n = self.len();
        let mut safe = vec![true; n];
        if radius == 0 {
            return safe;
        }
        let base: Vec<bool> = (0..n).map(|v| self.complete[v] && self.pred[v].is_some()).collect();
        safe.clone_from(&base);
        for _ in 1..radius {
            let next: Vec<bool> = (0..n)
                .map(|v| base[v] && safe[v] && self.neighbours(v).all(|u| safe[u]))
                .collect();
            safe = next;
        }
        safe
    }

    /// Maximal branching among complete vertices.
    pub fn max_branching(&self) -> usize {
        (0..self.len()).filter(|&v| self.complete[v]).map(|v| self.succ[v].len()).max().unwrap_or(0)
    }

    /// Vertices at a given level.
    pub fn level_set(&self, level: i64) -> Vec<VertexId> {
        (0..self.len()).filter(|&v| self.level[v] == level).collect()
    }
}

impl FlowMeasure {
    /// Backend tag.
    pub fn backend(&self) -> Backend {
        match self {
            FlowMeasure::Rational(_) => Backend::Rational,
            FlowMeasure::Float(_) => Backend::Float,
        }
    }

    /// Number of weighted vertices.
    pub fn len(&self) -> usize {
        match self {
            FlowMeasure::Rational(v) => v.len(),
            FlowMeasure::Float(v) => v.len(),
        }
    }

    /// True when no vertex is weighted.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mass of `v` as a float.
    pub fn value_f64(&self, v: VertexId) -> f64 {
        match self {
            FlowMeasure::Rational(m) => m[v].to_f64().unwrap_or(f64::NAN),
            FlowMeasure::Float(m) => m[v],
        }
    }

    /// All masses as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|v| self.value_f64(v)).collect()
    }

    /// Exact masses, when the backend is rational.
    pub fn as_rational(&self) -> Option<&[BigRational]> {
        match self {
            FlowMeasure::Rational(m) => Some(m),
            FlowMeasure::Float(_) => None,
        }
    }

    /// Converts to a float-backed measure.
    pub fn to_float(&self) -> FlowMeasure {
        FlowMeasure::Float(self.to_f64())
    }

    /// Mass of `v` embedded in a scalar type.
    pub fn value<S: Scalar>(&self, v: VertexId) -> Result<S> {
        match self {
            FlowMeasure::Rational(m) => Ok(S::from_rational(&m[v])),
            FlowMeasure::Float(m) => S::from_f64(m[v]).ok_or_else(|| {
                Error::Backend("float measure cannot feed an exact evaluation".into())
            }),
        }
    }

    /// Inverse mass of `v` embedded in a scalar type.
    pub fn inverse<S: Scalar>(&self, v: VertexId) -> Result<S> {
        match self {
            FlowMeasure::Rational(m) => Ok(S::from_rational(&m[v].recip())),
            FlowMeasure::Float(m) => S::from_f64(1.0 / m[v]).ok_or_else(|| {
                Error::Backend("float measure cannot feed an exact evaluation".into())
            }),
        }
    }

    /// Ratios `m(v)/m(p(v))` (one at the apex) embedded in a scalar type.
    pub fn ratios<S: Scalar>(&self, w: &TreeWindow) -> Result<Vec<S>> {
        (0..w.len())
            .map(|v| match (self, w.pred(v)) {
                (_, None) => Ok(S::one()),
                (FlowMeasure::Rational(m), Some(p)) => Ok(S::from_rational(&(&m[v] / &m[p]))),
                (FlowMeasure::Float(m), Some(p)) => S::from_f64(m[v] / m[p]).ok_or_else(|| {
                    Error::Backend("float measure cannot feed an exact evaluation".into())
                }),
            })
            .collect()
    }

    /// Checks positivity and the flow equation at every complete vertex.
    pub fn validate(&self, w: &TreeWindow) -> Result<()> {
        if self.len() != w.len() {
            return Err(Error::Schema("measure length does not match window".into()));
        }
        match self {
            FlowMeasure::Rational(m) => {
                for v in 0..w.len() {
                    if !m[v].is_positive() {
                        return Err(Error::NonPositiveMeasure(w.label(v).to_string()));
                    }
                }
                for v in 0..w.len() {
                    if w.is_complete(v) {
                        let sum: BigRational = w.succ(v).iter().map(|&c| m[c].clone()).sum();
                        if sum != m[v] {
                            return Err(Error::FlowViolated {
                                vertex: w.label(v).to_string(),
                                mass: m[v].to_string(),
                                sum: sum.to_string(),
                            });
                        }
                    }
                }
            }
            FlowMeasure::Float(m) => {
                for v in 0..w.len() {
                    if !(m[v] > 0.0 && m[v].is_finite()) {
                        return Err(Error::NonPositiveMeasure(w.label(v).to_string()));
                    }
                }
                for v in 0..w.len() {
                    if w.is_complete(v) {
                        let sum: f64 = w.succ(v).iter().map(|&c| m[c]).sum();
                        if (sum - m[v]).abs() > FLOAT_FLOW_TOL * m[v] {
                            return Err(Error::FlowViolated {
                                vertex: w.label(v).to_string(),
                                mass: m[v].to_string(),
                                sum: sum.to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A window together with its flow measure.
#[derive(Clone, Debug)]
pub struct FlowTree {
    pub window: TreeWindow,
    pub measure: FlowMeasure,
}

impl FlowTree {
    /// Validates and bundles a window with a measure.
    pub fn new(window: TreeWindow, measure: FlowMeasure) -> Result<Self> {
        measure.validate(&window)?;
        Ok(FlowTree { window, measure })
    }

    /// Float masses.
    pub fn masses_f64(&self) -> Vec<f64> {
        self.measure.to_f64()
    }
}

/// Successor ratios of a self-similar ambient tree: every vertex splits its mass
/// according to the same ordered ratio list.
#[derive(Clone, Debug)]
pub enum RatioProfile {
    Rational(Vec<BigRational>),
    Float(Vec<f64>),
}

impl RatioProfile {
    /// The canonical profile of the homogeneous tree of branching `q`.
    pub fn homogeneous(q: usize) -> Self {
        RatioProfile::Rational(vec![BigRational::new(BigInt::one(), BigInt::from(q)); q])
    }

    /// Golden binary profile `(1/φ, 1/φ²)`.
    pub fn golden() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        RatioProfile::Float(vec![1.0 / phi, 1.0 - 1.0 / phi])
    }

    /// Number of successors of every vertex.
    pub fn branching(&self) -> usize {
        match self {
            RatioProfile::Rational(r) => r.len(),
            RatioProfile::Float(r) => r.len(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            RatioProfile::Rational(r) => {
                let s: BigRational = r.iter().cloned().sum();
                if r.is_empty() || !s.is_one() || r.iter().any(|x| !x.is_positive()) {
                    return Err(Error::InvalidArgument("ratios must be positive and sum to 1".into()));
                }
            }
            RatioProfile::Float(r) => {
                let s: f64 = r.iter().sum();
                if r.is_empty() || (s - 1.0).abs() > 1e-14 || r.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidArgument("ratios must be positive and sum to 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Selects, for each `j`, which successor slot of `p^{j+1}(o)` holds `p^j(o)`.
pub type ChainRule = fn(usize) -> usize;

/// Chain rule that always uses the first successor slot.
pub fn chain_first(_j: usize) -> usize {
    0
}

/// Aperiodic chain rule from the Fibonacci word.
pub fn chain_fibonacci(j: usize) -> usize {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let a = ((j + 2) as f64 / phi).floor() as i64;
    let b = ((j + 1) as f64 / phi).floor() as i64;
    (a - b) as usize
}

struct Builder {
    pred: Vec<Option<VertexId>>,
    complete: Vec<bool>,
    labels: Vec<String>,
    log_ratio: Vec<usize>,
    slot: Vec<usize>,
    cap: usize,
}

impl Builder {
    fn new(cap: usize) -> Self {
        Builder { pred: vec![], complete: vec![], labels: vec![], log_ratio: vec![], slot: vec![], cap }
    }
    fn push(&mut self, pred: Option<VertexId>, slot: usize, label: String) -> Result<VertexId> {
        if self.pred.len() >= self.cap {
            return Err(Error::ResourceLimit { needed: self.pred.len() as u128 + 1, cap: self.cap });
        }
        self.pred.push(pred);
        self.complete.push(false);
        self.labels.push(label);
        self.log_ratio.push(0);
        self.slot.push(slot);
        Ok(self.pred.len() - 1)
    }
}

fn estimate_ball(q: usize, radius: usize, up: usize) -> u128 {
    let q = q as u128;
    let mut total: u128 = 0;
    for j in 0..=radius {
        let depth_below = radius - j;
        let mut cone: u128 = 0;
        let mut p = 1u128;
        for _ in 0..=depth_below {
            cone = cone.saturating_add(p);
            p = p.saturating_mul(q);
        }
        total = total.saturating_add(cone);
    }
    total.saturating_add(up.saturating_sub(radius) as u128)
}

fn masses_from_slots(
    profile: &RatioProfile,
    pred: &[Option<VertexId>],
    slot: &[usize],
    base: VertexId,
    order: &[VertexId],
) -> FlowMeasure {
    match profile {
        RatioProfile::Rational(r) => {
            let mut m = vec![BigRational::zero(); pred.len()];
            let mut cur = base;
            m[base] = BigRational::one();
            while let Some(p) = pred[cur] {
                m[p] = &m[cur] / &r[slot[cur]];
                cur = p;
            }
            for &v in order {
                if let Some(p) = pred[v] {
                    if m[v].is_zero() {
                        m[v] = &m[p] * &r[slot[v]];
                    }
                }
            }
            FlowMeasure::Rational(m)
        }
        RatioProfile::Float(r) => {
            let mut m = vec![0.0; pred.len()];
            let mut cur = base;
            m[base] = 1.0;
            while let Some(p) = pred[cur] {
                m[p] = m[cur] / r[slot[cur]];
                cur = p;
            }
            for &v in order {
                if let Some(p) = pred[v] {
                    if m[v] == 0.0 {
                        m[v] = m[p] * r[slot[v]];
                    }
                }
            }
            FlowMeasure::Float(m)
        }
    }
}

/// A window holding the closed ball of radius `radius` around a base vertex `o`
/// of the self-similar ambient tree, extended by the ancestor chain of `o` up to
/// `up ≥ radius` generations.  `o` sits at level 0 and has mass 1.
pub fn ratio_ball_window(
    profile: &RatioProfile,
    chain: ChainRule,
    radius: usize,
    up: usize,
    cap: usize,
) -> Result<(FlowTree, VertexId)> {
    profile.check()?;
    let q = profile.branching();
    let up = up.max(radius);
    let needed = estimate_ball(q, radius, up);
    if needed > cap as u128 {
        return Err(Error::ResourceLimit { needed, cap });
    }
    let mut b = Builder::new(cap);
    let top = b.push(None, 0, format!("a{up}"))?;
    let mut chain_vertices = vec![top];
    for j in (0..up).rev() {
        let parent = *chain_vertices.last().unwrap();
        let label = if j == 0 { "o".to_string() } else { format!("a{j}") };
        let v = b.push(Some(parent), chain(j), label)?;
        chain_vertices.push(v);
    }
    chain_vertices.reverse();
    let base = chain_vertices[0];
    for j in 0..=radius {
        let anchor = chain_vertices[j];
        let budget = radius - j;
        let skip = if j == 0 { None } else { Some(chain(j - 1)) };
        grow_cone(&mut b, anchor, budget, skip, q)?;
    }
    let mut w = TreeWindow::from_preds(b.pred.clone(), b.complete.clone(), up as i64, Some(b.labels.clone()))?;
    let complete: Vec<bool> = (0..w.len()).map(|v| w.succ(v).len() == q).collect();
    w.complete = complete;
    let order = w.top_down();
    let m = masses_from_slots(profile, &b.pred, &b.slot, base, &order);
    Ok((FlowTree::new(w, m)?, base))
}

fn grow_cone(b: &mut Builder, anchor: VertexId, budget: usize, skip: Option<usize>, q: usize) -> Result<()> {
    if budget == 0 {
        return Ok(());
    }
    let mut frontier: Vec<VertexId> = Vec::new();
    for s in 0..q {
        if Some(s) == skip {
            continue;
        }
        let label = format!("{}.{}", b.labels[anchor], s);
        frontier.push(b.push(Some(anchor), s, label)?);
    }
    for _ in 1..budget {
        let mut next = Vec::with_capacity(frontier.len() * q);
        for &v in &frontier {
            for s in 0..q {
                let label = format!("{}.{}", b.labels[v], s);
                next.push(b.push(Some(v), s, label)?);
            }
        }
        frontier = next;
    }
    Ok(())
}

/// The ancestor chain of length `up` above a base vertex together with the full
/// `q`-ary cone of the base down `depth` levels, with the canonical flow
/// `m(x) = q^{ℓ(x)}` and the apex at `apex_level`.
pub fn homogeneous_window(q: usize, apex_level: i64, depth: usize, up: usize, cap: usize) -> Result<FlowTree> {
    if q == 0 {
        return Err(Error::InvalidArgument("branching must be at least 1".into()));
    }
    let mut needed: u128 = up as u128;
    let mut p: u128 = 1;
    for _ in 0..=depth {
        needed = needed.saturating_add(p);
        p = p.saturating_mul(q as u128);
    }
    if needed > cap as u128 {
        return Err(Error::ResourceLimit { needed, cap });
    }
    let mut b = Builder::new(cap);
    let mut cur = b.push(None, 0, if up == 0 { "o".into() } else { format!("a{up}") })?;
    for j in (0..up).rev() {
        let label = if j == 0 { "o".to_string() } else { format!("a{j}") };
        cur = b.push(Some(cur), 0, label)?;
    }
    let base = cur;
    let mut frontier = vec![base];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * q);
        for &v in &frontier {
            b.complete[v] = true;
            for s in 0..q {
                let label = format!("{}.{}", b.labels[v], s);
                next.push(b.push(Some(v), s, label)?);
            }
        }
        frontier = next;
    }
    for v in 0..base {
        b.complete[v] = q == 1;
    }
    let w = TreeWindow::from_preds(b.pred, b.complete, apex_level, Some(b.labels))?;
    let qr = BigRational::from_integer(BigInt::from(q));
    let m: Vec<BigRational> =
        (0..w.len()).map(|v| crate::scalar::rational_pow(&qr, w.level(v))).collect();
    FlowTree::new(w, FlowMeasure::Rational(m))
}

/// Closed ball of radius `radius` in the homogeneous tree of branching `q`
/// (canonical flow), extended by an ancestor chain of length `up`.
pub fn homogeneous_ball_window(q: usize, radius: usize, up: usize, cap: usize) -> Result<(FlowTree, VertexId)> {
    ratio_ball_window(&RatioProfile::homogeneous(q), chain_first, radius, up, cap)
}

/// A path of `len` vertices (the integers) with unit mass; the apex sits at `apex_level`.
pub fn path_window(len: usize, apex_level: i64) -> Result<FlowTree> {
    if len == 0 {
        return Err(Error::InvalidArgument("path needs at least one vertex".into()));
    }
    let pred: Vec<Option<VertexId>> = (0..len).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
    let complete: Vec<bool> = (0..len).map(|i| i + 1 < len).collect();
    let labels: Vec<String> = (0..len).map(|i| (apex_level - i as i64).to_string()).collect();
    let w = TreeWindow::from_preds(pred, complete, apex_level, Some(labels))?;
    FlowTree::new(w, FlowMeasure::Rational(vec![BigRational::one(); len]))
}

#[derive(Deserialize)]
struct TreeDocument {
    #[serde(default)]
    apex_level: Option<i64>,
    vertices: Vec<VertexRecord>,
}

#[derive(Deserialize)]
struct VertexRecord {
    id: serde_json::Value,
    #[serde(default)]
    pred: serde_json::Value,
    measure: serde_json::Value,
    complete: bool,
}

#[derive(Serialize)]
struct VertexRecordOut {
    id: String,
    pred: Option<String>,
    measure: serde_json::Value,
    complete: bool,
}

#[derive(Serialize)]
struct TreeDocumentOut {
    apex_level: i64,
    vertices: Vec<VertexRecordOut>,
}

fn id_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => Some(n.to_string()),
        _ => None,
    }
}

/// Parses and validates a tree-description JSON document.
pub fn parse_window(text: &str) -> Result<FlowTree> {
    let doc: TreeDocument = serde_json::from_str(text)
        .map_err(|e| Error::Schema(format!("malformed tree document: {e}")))?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(doc.vertices.len());
    for (i, rec) in doc.vertices.iter().enumerate() {
        let id = id_text(&rec.id)
            .ok_or_else(|| Error::Schema(format!("vertices[{i}]: id must be an integer or string")))?;
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::Schema(format!("vertices[{i}]: duplicate id {id}")));
        }
        labels.push(id);
    }
    let mut pred = Vec::with_capacity(labels.len());
    let mut complete = Vec::with_capacity(labels.len());
    let mut any_float = false;
    let mut exact: Vec<Option<BigRational>> = Vec::with_capacity(labels.len());
    let mut float = Vec::with_capacity(labels.len());
    for (i, rec) in doc.vertices.iter().enumerate() {
        let p = match &rec.pred {
            serde_json::Value::Null => None,
            other => {
                let key = id_text(other)
                    .ok_or_else(|| Error::Schema(format!("vertices[{i}]: pred must be an id or null")))?;
                Some(*index.get(&key).ok_or_else(|| {
                    Error::Schema(format!("vertices[{i}]: unknown predecessor {key}"))
                })?)
            }
        };
        pred.push(p);
        complete.push(rec.complete);
        match &rec.measure {
            serde_json::Value::String(s) => {
                let r = parse_rational(s)
                    .ok_or_else(|| Error::Schema(format!("vertices[{i}]: unparsable measure {s:?}")))?;
                float.push(r.to_f64().unwrap_or(f64::NAN));
                exact.push(Some(r));
            }
            serde_json::Value::Number(n) => {
                if let Some(k) = n.as_i64() {
                    exact.push(Some(BigRational::from_integer(BigInt::from(k))));
                    float.push(k as f64);
                } else {
                    any_float = true;
                    exact.push(None);
                    float.push(n.as_f64().unwrap_or(f64::NAN));
                }
            }
            _ => return Err(Error::Schema(format!("vertices[{i}]: measure must be a string or number"))),
        }
    }
    let window = TreeWindow::from_preds(pred, complete, doc.apex_level.unwrap_or(0), Some(labels))?;
    let measure = if any_float {
        FlowMeasure::Float(float)
    } else {
        FlowMeasure::Rational(exact.into_iter().map(|r| r.expect("exact measure")).collect())
    };
    FlowTree::new(window, measure)
}

/// Reads and validates a tree-description JSON file.
pub fn load_window(path: &Path) -> Result<FlowTree> {
    let text = std::fs::read_to_string(path)?;
    parse_window(&text)
}

/// Serializes a flow tree to the tree-description JSON format.
pub fn window_to_json(tree: &FlowTree) -> Result<String> {
    let w = &tree.window;
    let vertices = (0..w.len())
        .map(|v| VertexRecordOut {
            id: w.label(v).to_string(),
            pred: w.pred(v).map(|p| w.label(p).to_string()),
            measure: match &tree.measure {
                FlowMeasure::Rational(m) => serde_json::Value::String(m[v].to_string()),
                FlowMeasure::Float(m) => serde_json::json!(m[v]),
            },
            complete: w.is_complete(v),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&TreeDocumentOut { apex_level: w.apex_level(), vertices })?)
}

/// A dense vertex function assigning `q(x) = #succ(x)` order indices.
pub fn default_enumerator(w: &TreeWindow) -> Vec<usize> {
    let mut ord = vec![0; w.len()];
    for v in 0..w.len() {
        for (i, &c) in w.succ(v).iter().enumerate() {
            ord[c] = i;
        }
    }
    ord
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn homogeneous_counts() {
        let t = homogeneous_window(1, 0, 5, 5, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(t.window.len(), 11);
        assert!(t.measure.as_rational().unwrap().iter().all(|m| m.is_one()));
        let t = homogeneous_window(2, 0, 3, 0, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(t.window.len(), 15);
        let leaves = t.window.level_set(-3);
        assert_eq!(leaves.len(), 8);
        for &l in &leaves {
            assert_eq!(t.measure.as_rational().unwrap()[l], ratio(1, 8));
        }
        let t = homogeneous_window(3, 0, 2, 0, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(t.window.len(), 13);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let err = homogeneous_window(10, 0, 8, 0, 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
    }

    #[test]
    fn safe_region_radius_one_is_complete_with_parent() {
        let t = homogeneous_window(2, 0, 3, 2, DEFAULT_VERTEX_CAP).unwrap();
        let w = &t.window;
        let s1 = w.safe_region(1);
        for v in 0..w.len() {
            assert_eq!(s1[v], w.is_complete(v) && w.pred(v).is_some());
        }
        let s0 = w.safe_region(0);
        assert!(s0.iter().all(|&b| b));
        let s2 = w.safe_region(2);
        for v in 0..w.len() {
            assert!(!s2[v] || s1[v]);
        }
    }

    #[test]
    fn ball_window_contains_ball() {
        let (t, o) = homogeneous_ball_window(2, 3, 5, DEFAULT_VERTEX_CAP).unwrap();
        let w = &t.window;
        let ball = w.ball(o, 3);
        assert_eq!(ball.len(), 1 + 3 + 6 + 12);
        let safe = w.safe_region(3);
        assert!(safe[o]);
        assert!(!w.safe_region(4)[o]);
    }

    #[test]
    fn json_examples() {
        let ok = r#"{"apex_level":0,"vertices":[
            {"id":0,"pred":null,"measure":"1","complete":false},
            {"id":1,"pred":0,"measure":"1","complete":false},
            {"id":2,"pred":1,"measure":"1","complete":false}]}"#;
        assert!(parse_window(ok).is_ok());
        let ok2 = r#"{"apex_level":0,"vertices":[
            {"id":"r","pred":null,"measure":"1","complete":true},
            {"id":"a","pred":"r","measure":"1/2","complete":false},
            {"id":"b","pred":"r","measure":"1/2","complete":false}]}"#;
        assert!(parse_window(ok2).is_ok());
        let bad = ok2.replace("\"b\",\"pred\":\"r\",\"measure\":\"1/2\"", "\"b\",\"pred\":\"r\",\"measure\":\"1/3\"");
        assert!(matches!(parse_window(&bad), Err(Error::FlowViolated { .. })));
        let cyc = r#"{"vertices":[
            {"id":0,"pred":null,"measure":"1","complete":false},
            {"id":1,"pred":2,"measure":"1","complete":false},
            {"id":2,"pred":1,"measure":"1","complete":false}]}"#;
        assert!(matches!(parse_window(cyc), Err(Error::Cycle(_))));
        let two = r#"{"vertices":[
            {"id":0,"pred":null,"measure":"1","complete":false},
            {"id":1,"pred":null,"measure":"1","complete":false}]}"#;
        assert!(matches!(parse_window(two), Err(Error::Disconnected(_))));
        let neg = r#"{"vertices":[{"id":0,"pred":null,"measure":"-1","complete":false}]}"#;
        assert!(matches!(parse_window(neg), Err(Error::NonPositiveMeasure(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = homogeneous_window(3, 2, 2, 1, DEFAULT_VERTEX_CAP).unwrap();
        let text = window_to_json(&t).unwrap();
        let back = parse_window(&text).unwrap();
        assert_eq!(back.measure, t.measure);
        assert_eq!(back.window.len(), t.window.len());
    }

    #[test]
    fn golden_ball_is_flow() {
        let (t, o) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, 30, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(t.window.level(o), 0);
        assert!((t.measure.value_f64(o) - 1.0).abs() < 1e-15);
        assert_eq!(t.window.ball(o, 4).len(), 46);
    }
}
