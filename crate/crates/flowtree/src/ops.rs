//! The shift `Σ`, its adjoint `Σ*`, and noncommutative polynomials in them,
//! evaluated exactly on finite windows with per-vertex exactness tracking.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;

use num::{BigRational, One, Signed};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ratio, Scalar};
use crate::tree::{FlowMeasure, FlowTree, TreeWindow, VertexId};

/// The two generators: `Shift` is `Σ` (written `Z₁`), `Adjoint` is `Σ*` (written `Z₂`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    Shift,
    Adjoint,
}

impl Letter {
    /// Index `1` for `Σ`, `2` for `Σ*`.
    pub fn index(self) -> u8 {
        match self {
            Letter::Shift => 1,
            Letter::Adjoint => 2,
        }
    }
}

/// A word `Z_{α₁}⋯Z_{α_N}`, acting on functions right to left.
pub type Word = Vec<Letter>;

/// Renders a word as `Z1Z2…` (the empty word is `1`).
pub fn word_name(w: &[Letter]) -> String {
    if w.is_empty() {
        return "1".into();
    }
    w.iter().map(|l| format!("Z{}", l.index())).collect()
}

/// A finite linear combination of words.
#[derive(Clone, PartialEq)]
pub struct NcPolynomial<S> {
    terms: BTreeMap<Word, S>,
}

impl<S: Scalar> fmt::Debug for NcPolynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.terms.iter().map(|(w, c)| format!("({c:?})·{}", word_name(w))).collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

impl<S: Scalar> Default for NcPolynomial<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> NcPolynomial<S> {
    /// The zero polynomial.
    pub fn zero() -> Self {
        NcPolynomial { terms: BTreeMap::new() }
    }

    /// `c` times the empty word.
    pub fn constant(c: S) -> Self {
        Self::monomial(Vec::new(), c)
    }

    /// The identity.
    pub fn one() -> Self {
        Self::constant(S::one())
    }

    /// `c` times one word.
    pub fn monomial(word: Word, c: S) -> Self {
        let mut p = Self::zero();
        p.add_term(word, c);
        p
    }

    /// `Σ`.
    pub fn shift() -> Self {
        Self::monomial(vec![Letter::Shift], S::one())
    }

    /// `Σ*`.
    pub fn adjoint_shift() -> Self {
        Self::monomial(vec![Letter::Adjoint], S::one())
    }

    fn half() -> S {
        S::from_rational(&ratio(1, 2))
    }

    /// The gradient `∇ = I − Σ`.
    pub fn gradient() -> Self {
        Self::one() - Self::shift()
    }

    /// The adjoint gradient `∇* = I − Σ*`.
    pub fn gradient_adjoint() -> Self {
        Self::one() - Self::adjoint_shift()
    }

    /// The averaging operator `(Σ + Σ*)/2`.
    pub fn averaging() -> Self {
        (Self::shift() + Self::adjoint_shift()).scale(&Self::half())
    }

    /// The flow Laplacian `½(1 − Z₂)(1 − Z₁)`.
    pub fn laplacian() -> Self {
        (Self::gradient_adjoint() * Self::gradient()).scale(&Self::half())
    }

    /// `Σ_k a_k 𝓛^k`.
    pub fn laplacian_polynomial(coeffs: &[S]) -> Self {
        let lap = Self::laplacian();
        let mut out = Self::zero();
        let mut power = Self::one();
        for (k, c) in coeffs.iter().enumerate() {
            if k > 0 {
                power = power * lap.clone();
            }
            if !c.is_zero() {
                out = out + power.scale(c);
            }
        }
        out
    }

    /// Adds `c·word`, dropping zero coefficients.
    pub fn add_term(&mut self, word: Word, c: S) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(word.clone()).or_insert_with(S::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&word);
        }
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero();
        for (w, a) in &self.terms {
            out.add_term(w.clone(), a.clone() * c.clone());
        }
        out
    }

    /// Integer power under composition.
    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out * self.clone();
        }
        out
    }

    /// The terms, ordered by word.
    pub fn terms(&self) -> impl Iterator<Item = (&Word, &S)> {
        self.terms.iter()
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True for the zero polynomial.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximal word length (0 for constants and for zero).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// `‖F‖_(R) = Σ |c_α| R^{|α|}` as a float.
    pub fn norm_r(&self, r: f64) -> f64 {
        self.terms.iter().map(|(w, c)| c.modulus() * r.powi(w.len() as i32)).sum()
    }

    /// Rewrites every word with `Z₂Z₁ = 1` until all `Z₁` precede all `Z₂`.
    pub fn normalized(&self) -> Self {
        let mut out = Self::zero();
        for (w, c) in &self.terms {
            out.add_term(normal_word(w), c.clone());
        }
        out
    }

    /// The formal adjoint: reverse every word, swap the letters, conjugate coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (w, c) in &self.terms {
            let rev: Word = w
                .iter()
                .rev()
                .map(|l| match l {
                    Letter::Shift => Letter::Adjoint,
                    Letter::Adjoint => Letter::Shift,
                })
                .collect();
            out.add_term(rev, c.conj());
        }
        out
    }

    /// Converts coefficients into another scalar type.
    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> NcPolynomial<T> {
        let mut out = NcPolynomial::zero();
        for (w, c) in &self.terms {
            out.add_term(w.clone(), f(c));
        }
        out
    }
}

impl NcPolynomial<BigRational> {
    /// `‖F‖_(R)` computed exactly.
    pub fn norm_r_exact(&self, r: &BigRational) -> BigRational {
        self.terms
            .iter()
            .map(|(w, c)| c.abs() * crate::scalar::rational_pow(r, w.len() as i64))
            .sum()
    }
}

/// Reduces a word with `Z₂Z₁ = 1` to the form `Z₁^a Z₂^b`.
pub fn normal_word(w: &[Letter]) -> Word {
    let mut stack: Word = Vec::with_capacity(w.len());
    for &l in w {
        if l == Letter::Shift && stack.last() == Some(&Letter::Adjoint) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    stack
}

impl<S: Scalar> std::ops::Add for NcPolynomial<S> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
        self
    }
}

impl<S: Scalar> std::ops::Sub for NcPolynomial<S> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (w, c) in rhs.terms {
            self.add_term(w, -c);
        }
        self
    }
}

impl<S: Scalar> std::ops::Mul for NcPolynomial<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let mut w = a.clone();
                w.extend_from_slice(b);
                out.add_term(w, ca.clone() * cb.clone());
            }
        }
        out
    }
}

/// Dense vertex function with a per-vertex exactness flag.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedFunction<S> {
    pub values: Vec<S>,
    pub exact: Vec<bool>,
}

/// Precomputed local data for evaluating words on one flow tree.
pub struct LocalCalculus<'a, S> {
    window: &'a TreeWindow,
    ratio: Vec<S>,
}

impl<'a, S: Scalar> LocalCalculus<'a, S> {
    /// Prepares successor ratios `m(c)/m(p(c))` in the scalar type `S`.
    pub fn new(tree: &'a FlowTree) -> Result<Self> {
        Ok(LocalCalculus { window: &tree.window, ratio: tree.measure.ratios(&tree.window)? })
    }

    /// Builds the calculus from a window and measure held separately.
    pub fn from_parts(window: &'a TreeWindow, measure: &FlowMeasure) -> Result<Self> {
        Ok(LocalCalculus { window, ratio: measure.ratios(window)? })
    }

    /// The window.
    pub fn window(&self) -> &TreeWindow {
        self.window
    }

    /// Ratio `m(v)/m(p(v))`.
    pub fn ratio(&self, v: VertexId) -> &S {
        &self.ratio[v]
    }

    /// Distance from each vertex to the support of `f` (`usize::MAX` when `f = 0`).
    pub fn support_distance(&self, f: &[S]) -> Vec<usize> {
        let w = self.window;
        let mut dist = vec![usize::MAX; w.len()];
        let mut queue = VecDeque::new();
        for (v, x) in f.iter().enumerate() {
            if !x.is_zero() {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for u in w.neighbours(v) {
                if dist[u] == usize::MAX {
                    dist[u] = d;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    fn outside_is_zero(dist: &[usize], v: VertexId, steps: usize) -> bool {
        dist[v] == usize::MAX || dist[v] + 1 > steps
    }

    /// One letter applied to `f`, which has already absorbed `steps` letters.
    pub fn apply_letter(
        &self,
        letter: Letter,
        f: &TrackedFunction<S>,
        dist: &[usize],
        steps: usize,
    ) -> TrackedFunction<S> {
        let w = self.window;
        let n = w.len();
        let mut values = Vec::with_capacity(n);
        let mut exact = Vec::with_capacity(n);
        match letter {
            Letter::Shift => {
                for v in 0..n {
                    match w.pred(v) {
                        Some(p) => {
                            values.push(f.values[p].clone());
                            exact.push(f.exact[p]);
                        }
                        None => {
                            values.push(S::zero());
                            exact.push(Self::outside_is_zero(dist, v, steps));
                        }
                    }
                }
            }
            Letter::Adjoint => {
                for v in 0..n {
                    let mut acc = S::zero();
                    let mut ok = w.is_complete(v) || Self::outside_is_zero(dist, v, steps);
                    for &c in w.succ(v) {
                        if !f.values[c].is_zero() {
                            acc = acc + f.values[c].clone() * self.ratio[c].clone();
                        }
                        ok &= f.exact[c];
                    }
                    values.push(acc);
                    exact.push(ok);
                }
            }
        }
        TrackedFunction { values, exact }
    }

    /// The averaging operator `(Σ + Σ*)/2` applied to `f` after `steps` letters.
    pub fn apply_averaging(&self, f: &TrackedFunction<S>, dist: &[usize], steps: usize) -> TrackedFunction<S> {
        let a = self.apply_letter(Letter::Shift, f, dist, steps);
        let b = self.apply_letter(Letter::Adjoint, f, dist, steps);
        let half = S::from_rational(&ratio(1, 2));
        TrackedFunction {
            values: a.values.into_iter().zip(b.values).map(|(x, y)| (x + y) * half.clone()).collect(),
            exact: a.exact.into_iter().zip(b.exact).map(|(x, y)| x && y).collect(),
        }
    }

    /// Applies a word (last letter first).
    pub fn apply_word(&self, word: &[Letter], f: &[S]) -> TrackedFunction<S> {
        let dist = self.support_distance(f);
        let mut cur = TrackedFunction { values: f.to_vec(), exact: vec![true; f.len()] };
        for (k, &l) in word.iter().rev().enumerate() {
            cur = self.apply_letter(l, &cur, &dist, k);
        }
        cur
    }

    /// Applies a polynomial through a suffix trie so shared suffixes are evaluated once.
    pub fn apply_polynomial(&self, poly: &NcPolynomial<S>, f: &[S]) -> TrackedFunction<S> {
        let n = self.window.len();
        let dist = self.support_distance(f);
        let mut trie = Trie::default();
        for (w, c) in poly.terms() {
            trie.insert(w.iter().rev().copied(), c.clone());
        }
        let mut out = TrackedFunction { values: vec![S::zero(); n], exact: vec![true; n] };
        let start = TrackedFunction { values: f.to_vec(), exact: vec![true; n] };
        self.walk(&trie, &start, &dist, 0, &mut out);
        out
    }

    fn walk(
        &self,
        node: &Trie<S>,
        cur: &TrackedFunction<S>,
        dist: &[usize],
        steps: usize,
        out: &mut TrackedFunction<S>,
    ) {
        if let Some(c) = &node.coeff {
            for v in 0..out.values.len() {
                if !cur.values[v].is_zero() {
                    out.values[v] = out.values[v].clone() + c.clone() * cur.values[v].clone();
                }
                out.exact[v] &= cur.exact[v];
            }
        }
        for (letter, child) in &node.children {
            let next = self.apply_letter(*letter, cur, dist, steps);
            self.walk(child, &next, dist, steps + 1, out);
        }
    }

    /// Modulation `(𝓔f)(x) = (−1)^{ℓ(x)} f(x)`.
    pub fn modulation(&self, f: &[S]) -> Vec<S> {
        modulation(self.window, f)
    }
}

struct Trie<S> {
    coeff: Option<S>,
    children: BTreeMap<Letter, Trie<S>>,
}

impl<S> Default for Trie<S> {
    fn default() -> Self {
        Trie { coeff: None, children: BTreeMap::new() }
    }
}

impl<S> Trie<S> {
    fn insert(&mut self, mut letters: impl Iterator<Item = Letter>, c: S) {
        match letters.next() {
            None => self.coeff = Some(c),
            Some(l) => self.children.entry(l).or_default().insert(letters, c),
        }
    }
}

/// Modulation `(𝓔f)(x) = (−1)^{ℓ(x)} f(x)`.
pub fn modulation<S: Scalar>(w: &TreeWindow, f: &[S]) -> Vec<S> {
    f.iter()
        .enumerate()
        .map(|(v, x)| if w.level(v).rem_euclid(2) == 0 { x.clone() } else { -x.clone() })
        .collect()
}

/// The indicator `𝟙_y` on a window.
pub fn indicator<S: Scalar>(n: usize, y: VertexId) -> Vec<S> {
    let mut f = vec![S::zero(); n];
    f[y] = S::one();
    f
}

/// One column `x ↦ K(x, y)` of an integral kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelColumn<S> {
    /// The fixed second argument `y`.
    pub anchor: VertexId,
    /// Nonzero values, sorted by vertex.
    pub entries: Vec<(VertexId, S)>,
    /// Vertices where stored values are certified.
    pub safe: Vec<bool>,
    /// Bound on `|true − stored|` at safe vertices.
    pub err_bound: f64,
}

impl<S: Scalar> KernelColumn<S> {
    /// Builds a column from a dense vector.
    pub fn from_dense(anchor: VertexId, values: Vec<S>, safe: Vec<bool>, err_bound: f64) -> Self {
        let entries = values.into_iter().enumerate().filter(|(_, x)| !x.is_zero()).collect();
        KernelColumn { anchor, entries, safe, err_bound }
    }

    /// `K(x, anchor)` (zero off the stored support).
    pub fn get(&self, x: VertexId) -> S {
        match self.entries.binary_search_by_key(&x, |e| e.0) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => S::zero(),
        }
    }

    /// True when the value at `x` is certified.
    pub fn is_safe(&self, x: VertexId) -> bool {
        self.safe[x]
    }

    /// Dense copy of the values.
    pub fn dense(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.safe.len()];
        for (v, x) in &self.entries {
            out[*v] = x.clone();
        }
        out
    }

    /// Maximal distance from the anchor to a nonzero entry.
    pub fn support_radius(&self, w: &TreeWindow) -> usize {
        self.entries.iter().map(|(v, _)| w.distance(*v, self.anchor)).max().unwrap_or(0)
    }

    /// Writes the column as CSV with metadata comment lines.
    pub fn write_csv(&self, w: &TreeWindow, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# anchor={}", w.label(self.anchor))?;
        writeln!(out, "# err_bound={:e}", self.err_bound)?;
        writeln!(out, "x_id,value_re,value_im,distance,level_x")?;
        for (v, x) in &self.entries {
            let z = x.to_complex();
            writeln!(out, "{},{:e},{:e},{},{}", w.label(*v), z.re, z.im, w.distance(*v, self.anchor), w.level(*v))?;
        }
        Ok(())
    }
}

fn column_from_function<S: Scalar>(
    tree: &FlowTree,
    y: VertexId,
    f: TrackedFunction<S>,
) -> Result<KernelColumn<S>> {
    let inv: S = tree.measure.inverse(y)?;
    let values = f.values.into_iter().map(|x| x * inv.clone()).collect();
    Ok(KernelColumn::from_dense(y, values, f.exact, 0.0))
}

/// Exact kernel column `K_F(·, y) = F𝟙_y / m(y)`; requires `y` in the safe region of `deg F`.
pub fn kernel_column_poly<S: Scalar>(tree: &FlowTree, poly: &NcPolynomial<S>, y: VertexId) -> Result<KernelColumn<S>> {
    let deg = poly.degree();
    if !tree.window.safe_region(deg)[y] {
        return Err(Error::InsufficientMargin { vertex: tree.window.label(y).to_string(), radius: deg });
    }
    kernel_column_poly_masked(tree, poly, y)
}

/// Kernel column with per-vertex exactness flags and no margin requirement.
pub fn kernel_column_poly_masked<S: Scalar>(
    tree: &FlowTree,
    poly: &NcPolynomial<S>,
    y: VertexId,
) -> Result<KernelColumn<S>> {
    let calc = LocalCalculus::<S>::new(tree)?;
    let f = calc.apply_polynomial(poly, &indicator(tree.window.len(), y));
    column_from_function(tree, y, f)
}

/// Weighted column sum `Σ_x w(d(x,y), ℓ(x), ℓ(y)) |K(x,y)| m(x)` over certified vertices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightedSum {
    pub value: f64,
    /// True when the column support reaches a vertex with a neighbour outside the window.
    pub truncated: bool,
    /// Certified error of the sum induced by the column error bound.
    pub err: f64,
}

/// Computes the weighted column sum of a kernel column.
pub fn weighted_col_sums<S: Scalar>(
    tree: &FlowTree,
    column: &KernelColumn<S>,
    weight: impl Fn(usize, i64, i64) -> f64,
) -> WeightedSum {
    let w = &tree.window;
    let y = column.anchor;
    let ly = w.level(y);
    let mut value = 0.0;
    let mut err = 0.0;
    let mut truncated = false;
    for (x, k) in &column.entries {
        if !column.safe[*x] {
            continue;
        }
        let wt = weight(w.distance(*x, y), w.level(*x), ly);
        let mx = tree.measure.value_f64(*x);
        value += wt * k.modulus() * mx;
        err += wt * column.err_bound * mx;
        truncated |= w.touches_boundary(*x);
    }
    WeightedSum { value, truncated, err }
}

/// Exact version of the unweighted column sum `Σ_x |K(x,y)| m(x)` for rational columns.
pub fn column_mass_exact(tree: &FlowTree, column: &KernelColumn<BigRational>) -> Result<BigRational> {
    let m = tree
        .measure
        .as_rational()
        .ok_or_else(|| Error::Backend("exact column mass needs a rational measure".into()))?;
    Ok(column.entries.iter().map(|(x, k)| k.abs() * &m[*x]).sum())
}

/// Signed pairing `Σ_x K(x,y) m(x)` over certified vertices.
pub fn column_pairing_with_constants<S: Scalar>(tree: &FlowTree, column: &KernelColumn<S>) -> Result<S> {
    let mut acc = S::zero();
    for (x, k) in &column.entries {
        if column.safe[*x] {
            acc = acc + k.clone() * tree.measure.value::<S>(*x)?;
        }
    }
    Ok(acc)
}

/// `‖F‖_(R)` evaluated at `R = 1` as an exact rational, for norm bounds.
pub fn unit_norm_exact(poly: &NcPolynomial<BigRational>) -> BigRational {
    poly.norm_r_exact(&BigRational::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;
    use crate::tree::{homogeneous_ball_window, homogeneous_window, DEFAULT_VERTEX_CAP};

    type Q = BigRational;

    fn t2() -> (FlowTree, VertexId) {
        homogeneous_ball_window(2, 4, 6, DEFAULT_VERTEX_CAP).unwrap()
    }

    #[test]
    fn shift_indicator_moves_to_children() {
        let (t, o) = t2();
        let calc = LocalCalculus::<Q>::new(&t).unwrap();
        let g = calc.apply_word(&[Letter::Shift], &indicator(t.window.len(), o));
        for v in 0..t.window.len() {
            let expect = if t.window.pred(v) == Some(o) { Q::one() } else { Q::zero() };
            assert_eq!(g.values[v], expect);
        }
    }

    #[test]
    fn adjoint_indicator_moves_to_parent() {
        let (t, o) = t2();
        let calc = LocalCalculus::<Q>::new(&t).unwrap();
        let g = calc.apply_word(&[Letter::Adjoint], &indicator(t.window.len(), o));
        let p = t.window.pred(o).unwrap();
        assert_eq!(g.values[p], ratio(1, 2));
        assert_eq!(g.values.iter().filter(|x| !x.is_zero()).count(), 1);
    }

    #[test]
    fn laplacian_indicator_closed_form() {
        let (t, o) = t2();
        let calc = LocalCalculus::<Q>::new(&t).unwrap();
        let g = calc.apply_polynomial(&NcPolynomial::laplacian(), &indicator(t.window.len(), o));
        let p = t.window.pred(o).unwrap();
        for v in 0..t.window.len() {
            let expect = if v == o {
                Q::one()
            } else if v == p {
                ratio(-1, 4)
            } else if t.window.pred(v) == Some(o) {
                ratio(-1, 2)
            } else {
                Q::zero()
            };
            assert_eq!(g.values[v], expect, "vertex {}", t.window.label(v));
        }
        assert!(g.exact.iter().all(|&e| e));
    }

    #[test]
    fn sibling_kernel() {
        let (t, o) = t2();
        let poly = NcPolynomial::<Q>::monomial(vec![Letter::Shift, Letter::Adjoint], Q::one());
        let col = kernel_column_poly(&t, &poly, o).unwrap();
        let m = t.measure.as_rational().unwrap();
        let p = t.window.pred(o).unwrap();
        for v in 0..t.window.len() {
            let expect = if t.window.pred(v) == Some(p) { m[p].recip() } else { Q::zero() };
            assert_eq!(col.get(v), expect);
        }
    }

    #[test]
    fn identity_kernel_and_weighted_sums() {
        let (t, o) = t2();
        let col = kernel_column_poly(&t, &NcPolynomial::<Q>::one(), o).unwrap();
        assert_eq!(col.entries, vec![(o, Q::one())]);
        assert!((weighted_col_sums(&t, &col, |_, _, _| 1.0).value - 1.0).abs() < 1e-15);
        let lap = kernel_column_poly(&t, &NcPolynomial::<Q>::laplacian(), o).unwrap();
        assert_eq!(column_mass_exact(&t, &lap).unwrap(), ratio(2, 1));
        let s = weighted_col_sums(&t, &lap, |d, _, _| 1.0 + d as f64);
        assert!((s.value - 3.0).abs() < 1e-14);
    }

    #[test]
    fn normal_form_cancels_adjoint_shift() {
        let w = vec![Letter::Shift, Letter::Adjoint, Letter::Shift, Letter::Adjoint];
        assert_eq!(normal_word(&w), vec![Letter::Shift, Letter::Adjoint]);
        assert_eq!(normal_word(&[Letter::Adjoint, Letter::Shift]), Vec::<Letter>::new());
    }

    #[test]
    fn modulation_conjugates_laplacian() {
        let (t, o) = t2();
        let calc = LocalCalculus::<Q>::new(&t).unwrap();
        let n = t.window.len();
        let lap = NcPolynomial::<Q>::laplacian();
        let e1 = calc.modulation(&indicator(n, o));
        let e2 = calc.apply_polynomial(&lap, &e1).values;
        let lhs = calc.modulation(&e2);
        let two_minus = NcPolynomial::<Q>::constant(ratio(2, 1)) - lap;
        let rhs = calc.apply_polynomial(&two_minus, &indicator(n, o)).values;
        assert_eq!(lhs, rhs);
        let ones = vec![Q::one(); n];
        let alt = calc.modulation(&ones);
        assert_eq!(calc.modulation(&alt), ones);
    }

    #[test]
    fn margin_is_required() {
        let t = homogeneous_window(2, 0, 3, 0, DEFAULT_VERTEX_CAP).unwrap();
        let err = kernel_column_poly(&t, &NcPolynomial::<Q>::laplacian(), t.window.apex()).unwrap_err();
        assert!(matches!(err, Error::InsufficientMargin { .. }));
    }
}
