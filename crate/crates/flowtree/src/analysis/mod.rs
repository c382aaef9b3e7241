//! Numerical experiments: heat and gradient heat kernels, the Riesz kernel by
//! quadrature and its closed-form skew part, level and weighted estimates,
//! dyadic multiplier pieces, the sharpness exponent, and two probes.

pub mod estimates;
pub mod heat;
pub mod probes;
pub mod riesz;

use crate::error::Result;
use crate::tree::{TreeWindow, VertexId};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

pub use estimates::*;
pub use heat::*;
pub use probes::*;
pub use riesz::*;

/// Least-squares line `log y ≈ intercept + slope · log x`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
}

/// Ordinary least squares of `ys` against `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Fit {
    let n = xs.len().min(ys.len());
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxy: f64 = (0..n).map(|i| (xs[i] - mx) * (ys[i] - my)).sum();
    let sxx: f64 = (0..n).map(|i| (xs[i] - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = ((0..n).map(|i| (ys[i] - intercept - slope * xs[i]).powi(2)).sum::<f64>() / nf).sqrt();
    Fit { slope, intercept, residual, points: n }
}

/// Log-log fit of positive values `ys` against positive abscissae `xs`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Fit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// A table of measurements over a parameter grid with optional slope fits and
/// the metadata (window, degrees, certificates) that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fits: BTreeMap<String, Fit>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl EstimateReport {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        EstimateReport {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(|v| v.as_f64())
    }

    pub fn fit(&self, key: &str) -> Option<&Fit> {
        self.fits.get(key)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "name": self.name,
            "columns": self.columns,
            "fits": self.fits,
            "metadata": self.metadata,
        }))?)
    }
}

/// Anchors used for suprema: the whole candidate set when it has at most 1000
/// vertices, otherwise a deterministic sample stratified by level.
pub fn sample_anchors(w: &TreeWindow, candidates: &[VertexId]) -> Vec<VertexId> {
    const LIMIT: usize = 1000;
    if candidates.len() <= LIMIT {
        return candidates.to_vec();
    }
    let mut by_level: BTreeMap<i64, Vec<VertexId>> = BTreeMap::new();
    for &v in candidates {
        by_level.entry(w.level(v)).or_default().push(v);
    }
    let per = (LIMIT / by_level.len()).max(1);
    let mut out = Vec::new();
    for vs in by_level.values() {
        let step = vs.len().div_ceil(per).max(1);
        out.extend(vs.iter().step_by(step).copied());
    }
    out
}

/// Geometric grid of `n` points from `a` to `b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let xs = log_grid(1.0, 100.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.75)).collect();
        let f = fit_loglog(&xs, &ys);
        assert!((f.slope + 0.75).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }
}
