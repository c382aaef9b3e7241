//! Approximate eigenfunctions of the averaging operator and the spectrum of
//! window compressions of the flow Laplacian.

use super::{fit_loglog, EstimateReport};
use crate::error::{Error, Result};
use crate::tree::{FlowTree, VertexId};
use nalgebra::{DMatrix, SymmetricEigen};
use num::complex::Complex64;

/// Largest window accepted by the dense eigen-solve.
pub const DENSE_SPECTRUM_LIMIT: usize = 500;

/// Residual ratios `‖𝓐f − cos θ f‖₂ / ‖f‖₂` for `f = e^{iθℓ(x)} 𝟙_{V_d}`, where
/// `V_d` holds the descendants of `o` less than `d` generations below it, with
/// slopes of the log-ratios against `log d` per `θ`.
pub fn spectrum_probe(tree: &FlowTree, o: VertexId, thetas: &[f64], depths: &[usize]) -> Result<EstimateReport> {
    let w = &tree.window;
    let m = tree.masses_f64();
    if w.pred(o).is_none() {
        return Err(Error::InsufficientMargin { vertex: w.label(o).to_string(), radius: 1 });
    }
    let mut rep = EstimateReport::new("spectrum", &["theta", "d", "lambda", "residual_ratio"]);
    for &theta in thetas {
        for &d in depths {
            let members = descendants_within(tree, o, d)?;
            let mut f = vec![Complex64::new(0.0, 0.0); w.len()];
            let mut inside = vec![false; w.len()];
            for &x in &members {
                let ph = theta * w.level(x) as f64;
                f[x] = Complex64::new(ph.cos(), ph.sin());
                inside[x] = true;
            }
            let mut support: Vec<VertexId> = members.clone();
            support.push(w.pred(o).expect("checked above"));
            for &x in &members {
                support.extend_from_slice(w.succ(x));
            }
            support.sort_unstable();
            support.dedup();
            let c = theta.cos();
            let mut res = 0.0;
            let mut norm = 0.0;
            for &x in &support {
                let up = w.pred(x).map(|p| f[p]).unwrap_or_default();
                let down: Complex64 = w.succ(x).iter().map(|&y| f[y] * (m[y] / m[x])).sum();
                let a = (up + down) * 0.5;
                res += (a - f[x] * c).norm_sqr() * m[x];
                if inside[x] {
                    norm += m[x];
                }
            }
            rep.push(vec![theta, d as f64, 1.0 - c, (res / norm).sqrt()]);
        }
    }
    for &theta in thetas {
        let (ds, rs): (Vec<f64>, Vec<f64>) =
            rep.rows.iter().filter(|r| r[0] == theta).map(|r| (r[1], r[3])).unzip();
        if rs.iter().all(|r| *r > 0.0) {
            rep.fits.insert(format!("theta={theta:.6}"), fit_loglog(&ds, &rs));
        }
    }
    rep.meta("anchor", w.label(o));
    rep.meta("window_vertices", w.len());
    Ok(rep)
}

fn descendants_within(tree: &FlowTree, o: VertexId, d: usize) -> Result<Vec<VertexId>> {
    let w = &tree.window;
    let mut out = Vec::new();
    let mut frontier = vec![o];
    for depth in 0..d {
        let mut next = Vec::new();
        for &v in &frontier {
            if !w.is_complete(v) {
                return Err(Error::InsufficientMargin { vertex: w.label(v).to_string(), radius: depth + 1 });
            }
            next.extend_from_slice(w.succ(v));
        }
        out.extend(frontier);
        frontier = next;
    }
    Ok(out)
}

/// Eigenvalues of the compression of `𝓛` to the window, as a symmetric matrix in
/// the orthonormal basis `𝟙_v/√m(v)` of `ℓ²(window, m)`.
pub fn compressed_spectrum(tree: &FlowTree) -> Result<Vec<f64>> {
    let w = &tree.window;
    let n = w.len();
    if n > DENSE_SPECTRUM_LIMIT {
        return Err(Error::ResourceLimit { needed: n as u128, cap: DENSE_SPECTRUM_LIMIT });
    }
    let m = tree.masses_f64();
    let mut a = DMatrix::<f64>::identity(n, n);
    for v in 0..n {
        if let Some(p) = w.pred(v) {
            let off = -0.5 * (m[v] / m[p]).sqrt();
            a[(v, p)] = off;
            a[(p, v)] = off;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{homogeneous_window, path_window, DEFAULT_VERTEX_CAP};

    #[test]
    fn path_residual_is_exactly_inverse_root() {
        let tree = path_window(60, 0).unwrap();
        let rep = spectrum_probe(&tree, 5, &[0.0, 1.0], &[10, 20, 40]).unwrap();
        for r in &rep.rows {
            assert!((r[3] - 1.0 / r[1].sqrt()).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn compression_spectrum_in_range() {
        let tree = homogeneous_window(2, 0, 6, 20, DEFAULT_VERTEX_CAP).unwrap();
        let ev = compressed_spectrum(&tree).unwrap();
        assert!(ev[0] >= -1e-10 && *ev.last().unwrap() <= 2.0 + 1e-10);
    }
}
