//! Experiment runner behind the command-line front end: a serializable
//! configuration, grid and operator parsing, subcommand dispatch, and CSV plus
//! JSON artifacts with machine-readable failure records.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num::complex::Complex64;
use num::{BigInt, BigRational, Integer, One, ToPrimitive, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abel::{e_f_coefficients, e_f_polynomial_exact, homog_kernel_value, homog_kernel_value_exact, schrodinger_multiplier};
use crate::analysis::{
    compressed_spectrum, divergence_probe, imaginary_power_multiplier, level_sum_estimate, log_grid,
    mh_dyadic_norms, riesz_skew_check, sharpness_fit, sobolev_proxy, spectrum_probe, weighted_heat_sweep,
    weighted_heat_sweep_tree, CombColumn, EstimateReport, HeatVariant, Multiplier, QuadratureSpec, RieszEvaluator,
    RieszQuadrature, HEAT_TOL,
};
use crate::cheb::{cheb_approx, kernel_column_general};
use crate::error::{Error, Result};
use crate::ops::{kernel_column_poly, kernel_column_poly_masked, KernelColumn, Letter, NcPolynomial};
use crate::quotient::{
    build_submersion_rational, fiber_average_kernel, perturbation_probe, rationalize_flow, validate_submersion,
    write_perturbation_csv, ProbeOperator,
};
use crate::scalar::{parse_rational, ratio, QuadSurd, Scalar};
use crate::special::{heat_degree, low_pass};
use crate::tree::{
    chain_fibonacci, homogeneous_ball_window, load_window, parse_window, path_window, ratio_ball_window,
    Backend, FlowTree, RatioProfile, VertexId, DEFAULT_VERTEX_CAP,
};

/// Names of the available subcommands.
pub const COMMANDS: [&str; 13] = [
    "kernel",
    "heat",
    "riesz",
    "riesz-skew-check",
    "abel-check",
    "transfer-check",
    "rationalize",
    "weighted-sweep",
    "level-sum",
    "mh-norms",
    "sharpness",
    "divergence",
    "spectrum",
];

/// A complete description of one run.  Every field mirrors a command-line flag;
/// unset fields take per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// A tree-description file, or one of `golden`, `homogeneous`, `integers`, `ratios:r1,r2,…`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    /// An inline tree-description document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_inline: Option<serde_json::Value>,
    /// Label of the anchor vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Radius of built-in ball windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    /// Length of the ancestor chain of built-in windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// `a:b:n` (linear), `a:b:n:log` or `a:b:n(log)` (geometric), or a comma list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Time parameter of named multipliers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Exponent `k` of the named multiplier `x^k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
    /// `poly:c0,c1,…` (a polynomial in `𝓛`), `exp(-t*x)`, `x^k`, `x^{i*alpha}`, `schrodinger(t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Parses a JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("configuration: {e}")))
    }

    /// Reads a JSON configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("configuration {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Field-wise overlay: every field set in `other` replaces the value in `self`.
    pub fn overlay(&self, other: &ExperimentConfig) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        let top = serde_json::to_value(other)?;
        if let (Some(b), serde_json::Value::Object(t)) = (base.as_object_mut(), top) {
            for (k, v) in t {
                b.insert(k, v);
            }
        }
        Ok(serde_json::from_value(base)?)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Success,
    AssertionFailed,
    SchemaError,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::AssertionFailed => 1,
            RunStatus::SchemaError => 2,
        }
    }
}

/// One failed check or runtime error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub command: String,
    pub check: String,
    pub detail: String,
}

/// Result of [`run`].
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub artifacts: Vec<PathBuf>,
    pub failures: Vec<FailureRecord>,
}

fn is_schema_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Schema(_)
            | Error::Cycle(_)
            | Error::Disconnected(_)
            | Error::FlowViolated { .. }
            | Error::NonPositiveMeasure(_)
            | Error::InvalidArgument(_)
            | Error::Json(_)
    )
}

/// Runs one configured experiment, writing its artifacts under the output
/// directory.  Runtime errors and failed checks are written to
/// `<command>.failure.json`.
pub fn run(config: &ExperimentConfig) -> RunOutcome {
    let command = config.command.clone().unwrap_or_default();
    let failure_path = config.out_dir().join(format!("{}.failure.json", if command.is_empty() { "run" } else { &command }));
    let _ = std::fs::remove_file(&failure_path);
    let mut ctx = Context { cfg: config, command: command.clone(), artifacts: Vec::new(), failures: Vec::new() };
    let result = match config.jobs {
        Some(j) if j > 0 => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(|| dispatch(&mut ctx)),
            Err(e) => Err(Error::InvalidArgument(format!("jobs: {e}"))),
        },
        _ => dispatch(&mut ctx),
    };
    let status = match result {
        Err(e) => {
            let status = if is_schema_error(&e) { RunStatus::SchemaError } else { RunStatus::AssertionFailed };
            ctx.failures.push(FailureRecord { command: command.clone(), check: "error".into(), detail: e.to_string() });
            status
        }
        Ok(()) if ctx.failures.is_empty() => RunStatus::Success,
        Ok(()) => RunStatus::AssertionFailed,
    };
    if !ctx.failures.is_empty() {
        let path = failure_path;
        let record = serde_json::json!({ "status": status, "failures": ctx.failures });
        if std::fs::create_dir_all(config.out_dir()).is_ok()
            && std::fs::write(&path, serde_json::to_string_pretty(&record).unwrap_or_default()).is_ok()
        {
            ctx.artifacts.push(path);
        }
    }
    RunOutcome { status, artifacts: ctx.artifacts, failures: ctx.failures }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    command: String,
    artifacts: Vec<PathBuf>,
    failures: Vec<FailureRecord>,
}

impl Context<'_> {
    fn check(&mut self, ok: bool, check: &str, detail: String) {
        if !ok {
            self.failures.push(FailureRecord { command: self.command.clone(), check: check.into(), detail });
        }
    }

    fn path(&self, suffix: &str) -> Result<PathBuf> {
        let dir = self.cfg.out_dir();
        std::fs::create_dir_all(&dir)?;
        Ok(dir.join(format!("{}{suffix}", self.command)))
    }

    fn write_report(&mut self, suffix: &str, rep: &mut EstimateReport, tree: Option<&TreeSummary>) -> Result<()> {
        rep.meta("config", self.cfg);
        if let Some(t) = tree {
            rep.meta("window", t);
        }
        let csv = self.path(&format!("{suffix}.csv"))?;
        rep.write_csv(&mut BufWriter::new(File::create(&csv)?))?;
        let json = self.path(&format!("{suffix}.json"))?;
        std::fs::write(&json, rep.to_json()?)?;
        self.artifacts.push(csv);
        self.artifacts.push(json);
        Ok(())
    }

    fn write_sidecar(&mut self, suffix: &str, meta: serde_json::Value) -> Result<()> {
        let json = self.path(&format!("{suffix}.json"))?;
        let doc = serde_json::json!({ "name": self.command, "config": self.cfg, "metadata": meta });
        std::fs::write(&json, serde_json::to_string_pretty(&doc)?)?;
        self.artifacts.push(json);
        Ok(())
    }
}

fn dispatch(ctx: &mut Context<'_>) -> Result<()> {
    match ctx.command.as_str() {
        "kernel" => cmd_kernel(ctx),
        "heat" => cmd_heat(ctx),
        "riesz" => cmd_riesz(ctx),
        "riesz-skew-check" => cmd_riesz_skew(ctx),
        "abel-check" => cmd_abel(ctx),
        "transfer-check" => cmd_transfer(ctx),
        "rationalize" => cmd_rationalize(ctx),
        "weighted-sweep" => cmd_weighted(ctx),
        "level-sum" => cmd_level_sum(ctx),
        "mh-norms" => cmd_mh(ctx),
        "sharpness" => cmd_sharpness(ctx),
        "divergence" => cmd_divergence(ctx),
        "spectrum" => cmd_spectrum(ctx),
        "" => Err(Error::Schema("no command given".into())),
        other => Err(Error::Schema(format!("unknown command {other:?}; expected one of {}", COMMANDS.join(", ")))),
    }
}

/// Parses a grid: `a:b:n` (linear), `a:b:n:log` or `a:b:n(log)` (geometric), or `v1,v2,…`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("malformed grid {text:?}"));
    let t = text.trim();
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        let (count, log) = match parts.len() {
            3 => match parts[2].strip_suffix("(log)").or_else(|| parts[2].strip_suffix("log")) {
                Some(n) => (n, true),
                None => (parts[2], false),
            },
            4 if parts[3] == "log" => (parts[2], true),
            _ => return Err(bad()),
        };
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = count.trim().parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        if log {
            if a <= 0.0 || b <= 0.0 {
                return Err(bad());
            }
            return Ok(log_grid(a, b, n));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    t.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// A parsed operator: a polynomial in `𝓛` with rational coefficients or a named
/// multiplier evaluated through Chebyshev interpolation or the radial route.
#[derive(Clone)]
pub enum OperatorSpec {
    Polynomial(Vec<BigRational>),
    Multiplier { name: String, f: Multiplier },
}

impl OperatorSpec {
    pub fn name(&self) -> String {
        match self {
            OperatorSpec::Polynomial(c) => {
                format!("poly:{}", c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
            }
            OperatorSpec::Multiplier { name, .. } => name.clone(),
        }
    }

    /// The multiplier `λ ↦ F(λ)` as a function.
    pub fn function(&self) -> Multiplier {
        match self {
            OperatorSpec::Polynomial(c) => {
                let cf: Vec<f64> = c.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
                std::sync::Arc::new(move |l: f64| Complex64::new(cf.iter().rev().fold(0.0, |acc, a| acc * l + a), 0.0))
            }
            OperatorSpec::Multiplier { f, .. } => f.clone(),
        }
    }
}

/// `λ^{iα}` multiplied by a smooth cut vanishing near the origin.
pub fn cut_imaginary_power_multiplier(alpha: f64, cut: f64) -> Multiplier {
    let f = imaginary_power_multiplier(alpha);
    std::sync::Arc::new(move |l: f64| f(l) * (1.0 - low_pass(l / cut)))
}

fn parse_number(text: &str, name: &str, fallback: Option<f64>) -> Result<f64> {
    let t = text.trim();
    if t == name {
        return fallback.ok_or_else(|| Error::InvalidArgument(format!("operator needs --{name}")));
    }
    t.parse().map_err(|_| Error::InvalidArgument(format!("bad number {t:?} in operator")))
}

/// Parses an operator expression with parameters taken from the configuration.
pub fn parse_operator(text: &str, cfg: &ExperimentConfig) -> Result<OperatorSpec> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(rest) = t.strip_prefix("poly:") {
        let coeffs = rest
            .split(',')
            .map(|s| parse_rational(s).ok_or_else(|| Error::InvalidArgument(format!("bad coefficient {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        return Ok(OperatorSpec::Polynomial(coeffs));
    }
    if let Some(inner) = t.strip_prefix("exp(-").and_then(|r| r.strip_suffix("*x)")) {
        let tt = parse_number(inner, "t", cfg.t)?;
        return Ok(OperatorSpec::Multiplier {
            name: format!("exp(-{tt}*x)"),
            f: std::sync::Arc::new(move |l: f64| Complex64::new((-tt * l).exp(), 0.0)),
        });
    }
    if let Some(inner) = t.strip_prefix("schrodinger(").and_then(|r| r.strip_suffix(')')) {
        let tt = parse_number(inner, "t", cfg.t)?;
        let f = schrodinger_multiplier(tt);
        return Ok(OperatorSpec::Multiplier { name: format!("schrodinger({tt})"), f: std::sync::Arc::new(f) });
    }
    if let Some(inner) = t.strip_prefix("x^{i*").and_then(|r| r.strip_suffix('}')) {
        let a = parse_number(inner, "alpha", cfg.alpha)?;
        return Ok(OperatorSpec::Multiplier {
            name: format!("x^{{i*{a}}}"),
            f: cut_imaginary_power_multiplier(a, 1.0 / 16.0),
        });
    }
    if let Some(inner) = t.strip_prefix("x^") {
        let k = if inner == "k" {
            cfg.power.ok_or_else(|| Error::InvalidArgument("operator x^k needs --power".into()))?
        } else {
            inner.parse().map_err(|_| Error::InvalidArgument(format!("bad exponent {inner:?}")))?
        };
        let mut c = vec![BigRational::zero(); k as usize + 1];
        c[k as usize] = BigRational::one();
        return Ok(OperatorSpec::Polynomial(c));
    }
    Err(Error::InvalidArgument(format!("unknown operator {text:?}")))
}

/// Window description stored in every sidecar.
#[derive(Clone, Debug, Serialize)]
pub struct TreeSummary {
    pub source: String,
    pub vertices: usize,
    pub backend: Backend,
    pub apex_level: i64,
    pub anchor: String,
    pub max_branching: usize,
}

struct LoadedTree {
    tree: FlowTree,
    anchor: VertexId,
    summary: TreeSummary,
}

/// Vertex with the longest ancestor chain among those with descendants at least
/// `depth` generations below (or the deepest available).
fn default_anchor(tree: &FlowTree, depth: usize) -> VertexId {
    let w = &tree.window;
    let mut below = vec![0usize; w.len()];
    for v in w.top_down().into_iter().rev() {
        below[v] = w.succ(v).iter().map(|&c| below[c] + 1).max().unwrap_or(0).min(depth);
    }
    let reach = below.iter().copied().max().unwrap_or(0);
    let mut best = (0usize, w.apex());
    for v in (0..w.len()).filter(|&v| below[v] == reach) {
        let up = w.ancestors(v).len();
        if up > best.0 {
            best = (up, v);
        }
    }
    best.1
}

fn ratio_profile(list: &str) -> Result<RatioProfile> {
    let rs = list
        .split(',')
        .map(|s| parse_rational(s).ok_or_else(|| Error::InvalidArgument(format!("bad ratio {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioProfile::Rational(rs))
}

/// Loads the configured window.  Built-in names are sized by `default_radius`
/// and `default_up` unless the configuration overrides them.
fn load_tree(cfg: &ExperimentConfig, default_tree: &str, default_radius: usize, default_up: usize) -> Result<LoadedTree> {
    let radius = cfg.radius.unwrap_or(default_radius);
    let up = cfg.up.unwrap_or(default_up).max(radius);
    let (tree, anchor, source) = if let Some(doc) = &cfg.tree_inline {
        let t = parse_window(&doc.to_string())?;
        (t, None, "inline".to_string())
    } else {
        let name = cfg.tree.clone().unwrap_or_else(|| default_tree.to_string());
        match name.as_str() {
            "golden" => {
                let (t, o) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, radius, up, DEFAULT_VERTEX_CAP)?;
                (t, Some(o), name)
            }
            "homogeneous" => {
                let q = cfg.q.unwrap_or(2);
                let (t, o) = homogeneous_ball_window(q, radius, up, DEFAULT_VERTEX_CAP)?;
                (t, Some(o), format!("homogeneous:{q}"))
            }
            "integers" => {
                let len = 2 * up + 1;
                (path_window(len, up as i64)?, Some(up), name)
            }
            n if n.starts_with("ratios:") => {
                let profile = ratio_profile(&n["ratios:".len()..])?;
                let (t, o) = ratio_ball_window(&profile, chain_fibonacci, radius, up, DEFAULT_VERTEX_CAP)?;
                (t, Some(o), name)
            }
            path => (load_window(Path::new(path))?, None, path.to_string()),
        }
    };
    let anchor = match &cfg.anchor {
        Some(label) => tree
            .window
            .find(label)
            .ok_or_else(|| Error::InvalidArgument(format!("anchor {label:?} is not a vertex of the window")))?,
        None => anchor.unwrap_or_else(|| default_anchor(&tree, radius)),
    };
    let summary = TreeSummary {
        source,
        vertices: tree.window.len(),
        backend: tree.measure.backend(),
        apex_level: tree.window.apex_level(),
        anchor: tree.window.label(anchor).to_string(),
        max_branching: tree.window.max_branching(),
    };
    Ok(LoadedTree { tree, anchor, summary })
}

fn t_grid(cfg: &ExperimentConfig, default: &str) -> Result<Vec<f64>> {
    let g = parse_grid(cfg.t_grid.as_deref().unwrap_or(default))?;
    if g.iter().any(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("times must be non-negative".into()));
    }
    Ok(g)
}

fn write_column<S: Scalar>(ctx: &mut Context<'_>, tree: &FlowTree, col: &KernelColumn<S>) -> Result<()> {
    let csv = ctx.path(".csv")?;
    col.write_csv(&tree.window, &mut BufWriter::new(File::create(&csv)?))?;
    ctx.artifacts.push(csv);
    Ok(())
}

fn cmd_kernel(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let op = parse_operator(cfg.operator.as_deref().unwrap_or("poly:0,1"), cfg)?;
    let (degree, default_tree) = match &op {
        OperatorSpec::Polynomial(c) => (NcPolynomial::<BigRational>::laplacian_polynomial(c).degree(), "homogeneous"),
        OperatorSpec::Multiplier { .. } => (cfg.degree.unwrap_or(32), "integers"),
    };
    let lt = load_tree(cfg, default_tree, degree + 1, degree + 1)?;
    let (tree, y) = (&lt.tree, lt.anchor);
    let backend = cfg.backend.unwrap_or(tree.measure.backend());
    let (entries, err_bound) = match &op {
        OperatorSpec::Polynomial(c) if backend == Backend::Rational => {
            if tree.measure.as_rational().is_none() {
                return Err(Error::Backend("the rational backend needs a rational measure".into()));
            }
            let col = kernel_column_poly::<BigRational>(tree, &NcPolynomial::laplacian_polynomial(c), y)?;
            write_column(ctx, tree, &col)?;
            (col.entries.len(), col.err_bound)
        }
        OperatorSpec::Polynomial(c) => {
            let cf: Vec<f64> = c.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
            let col = kernel_column_poly::<f64>(tree, &NcPolynomial::laplacian_polynomial(&cf), y)?;
            write_column(ctx, tree, &col)?;
            (col.entries.len(), col.err_bound)
        }
        OperatorSpec::Multiplier { .. } => {
            if !tree.window.safe_region(degree)[y] {
                return Err(Error::InsufficientMargin { vertex: tree.window.label(y).to_string(), radius: degree });
            }
            let model = cheb_approx(|l| op.function()(l), degree)?;
            let col = kernel_column_general(tree, &model, y);
            write_column(ctx, tree, &col)?;
            (col.entries.len(), col.err_bound)
        }
    };
    ctx.write_sidecar(
        "",
        serde_json::json!({
            "window": lt.summary, "operator": op.name(), "degree": degree, "backend": backend,
            "entries": entries, "err_bound": err_bound,
        }),
    )
}

fn cmd_heat(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let ts = t_grid(cfg, "0:8:5")?;
    let tmax = ts.iter().cloned().fold(0.0, f64::max);
    let tol = cfg.tol.unwrap_or(1e-8);
    let lt = load_tree(cfg, "homogeneous", 1, heat_degree(tmax, HEAT_TOL) + 8)?;
    let mut rep =
        EstimateReport::new("heat", &["t", "degree", "pairing", "column_sum", "gradient_column_sum", "min_value", "truncated"]);
    for &t in &ts {
        let heat = CombColumn::new(&lt.tree, lt.anchor, t, HeatVariant::Heat, HEAT_TOL)?;
        let grad = CombColumn::new(&lt.tree, lt.anchor, t, HeatVariant::GradX, HEAT_TOL)?;
        let mass = heat.comb.tree.masses_f64();
        let pairing: f64 = (0..mass.len()).filter(|&v| heat.exact[v]).map(|v| heat.values[v] * mass[v]).sum();
        let min_value = (0..mass.len()).filter(|&v| heat.exact[v]).map(|v| heat.values[v]).fold(f64::INFINITY, f64::min);
        let (sum, tr1) = heat.weighted_sum(|_| 1.0);
        let (gsum, tr2) = grad.weighted_sum(|_| 1.0);
        rep.push(vec![t, heat.degree as f64, pairing, sum, gsum, min_value, (tr1 || tr2) as u8 as f64]);
        ctx.check((pairing - 1.0).abs() <= tol, "mass", format!("t = {t}: Σ K m = {pairing:.17e}"));
        let floor = -tol / mass[heat.comb.anchor()];
        ctx.check(min_value >= floor, "positivity", format!("t = {t}: min K = {min_value:e}"));
    }
    rep.meta("heat_tolerance", HEAT_TOL);
    ctx.write_report("", &mut rep, Some(&lt.summary))
}

fn riesz_up(spec: &QuadratureSpec) -> Result<usize> {
    Ok(RieszQuadrature::new(spec.clone())?.degree / 2 + 24)
}

fn cmd_riesz(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = QuadratureSpec::default();
    let depth = cfg.depth.unwrap_or(4);
    let lt = load_tree(cfg, "golden", depth, riesz_up(&spec)?)?;
    let w = &lt.tree.window;
    let y = lt.anchor;
    let xs = w.ball(y, depth);
    let mut ev = RieszEvaluator::new(&lt.tree, spec.clone())?;
    ev.prepare(y, &xs)?;
    let mut rep = EstimateReport::new("riesz", &["x", "distance", "level_difference", "re", "im", "error", "tail_bound"]);
    for &x in &xs {
        let v = ev.value(x, y)?;
        rep.push(vec![
            x as f64,
            w.distance(x, y) as f64,
            (w.level(x) - w.level(y)) as f64,
            v.value.re,
            v.value.im,
            v.error,
            v.tail_bound.unwrap_or(f64::NAN),
        ]);
    }
    rep.meta("quadrature", &spec);
    rep.meta("labels", xs.iter().map(|&x| w.label(x)).collect::<Vec<_>>());
    ctx.write_report("", &mut rep, Some(&lt.summary))
}

fn cmd_riesz_skew(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = QuadratureSpec::default();
    let radius = cfg.radius.unwrap_or(4);
    let depth = cfg.depth.unwrap_or(8);
    let tol = cfg.tol.unwrap_or(1e-6);
    let lt = load_tree(cfg, "golden", radius, riesz_up(&spec)?)?;
    let set = lt.tree.window.ball(lt.anchor, radius);
    let mut rep = riesz_skew_check(&lt.tree, &set, depth, spec)?;
    let dev = rep.meta_f64("max_deviation").unwrap_or(f64::NAN);
    ctx.check(dev <= tol, "skew-identity", format!("max deviation {dev:e} exceeds {tol:e}"));
    ctx.write_report("", &mut rep, Some(&lt.summary))
}

fn cmd_abel(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let q = cfg.q.unwrap_or(3);
    let max_power = cfg.degree.unwrap_or(6);
    let max_d = cfg.depth.unwrap_or(6);
    let backend = cfg.backend.unwrap_or(Backend::Rational);
    let tol = cfg.tol.unwrap_or(1e-10);
    let rep = abel_direct_check(q, max_power, max_d, backend)?;
    let mut rep = rep;
    for r in &rep.rows {
        let ok = match backend {
            Backend::Rational => r[3] == 0.0,
            Backend::Float => r[2] <= tol,
        };
        ctx.check(ok && r[1] > 0.0, "abel-direct", format!("power {}: deviation {:e} over {} pairs", r[0], r[2], r[1]));
    }
    ctx.write_report("", &mut rep, None)
}

/// Compares the Abel-route kernel of `𝓛^k`, `k ≤ max_power`, with the direct
/// local calculus on a homogeneous ball window, at every certified pair with
/// `d(x,y) ≤ max_distance`.  Columns: `power, pairs, max_deviation, mismatches`;
/// in the rational backend a mismatch is any inexact agreement.
pub fn abel_direct_check(q: usize, max_power: usize, max_distance: usize, backend: Backend) -> Result<EstimateReport> {
    if q < 2 {
        return Err(Error::InvalidArgument("the Abel route needs q ≥ 2".into()));
    }
    let radius = max_power.max(max_distance) + 2;
    let (tree, o) = homogeneous_ball_window(q, radius, radius, DEFAULT_VERTEX_CAP)?;
    let w = &tree.window;
    let mut rep = EstimateReport::new("abel-check", &["power", "pairs", "max_deviation", "mismatches"]);
    for k in 0..=max_power {
        let mut coeffs = vec![BigRational::zero(); k + 1];
        coeffs[k] = BigRational::one();
        let anchors = [o];
        let mut pairs = 0usize;
        let mut worst = 0.0f64;
        let mut mismatches = 0usize;
        match backend {
            Backend::Rational => {
                let e = e_f_polynomial_exact(q as u64, &coeffs);
                let poly = NcPolynomial::<BigRational>::laplacian_polynomial(&coeffs);
                for &y in &anchors {
                    let col = kernel_column_poly_masked(&tree, &poly, y)?;
                    for x in w.ball(y, max_distance) {
                        if !col.safe[x] {
                            continue;
                        }
                        pairs += 1;
                        let abel = homog_kernel_value_exact(q as u64, &e, w.level(x), w.level(y), w.distance(x, y));
                        let direct = QuadSurd::rational(col.get(x));
                        if abel != direct {
                            mismatches += 1;
                            worst = worst.max((abel - direct).to_f64().abs());
                        }
                    }
                }
            }
            Backend::Float => {
                let cf: Vec<f64> = coeffs.iter().map(|c| c.to_f64().unwrap_or(0.0)).collect();
                let radial =
                    e_f_coefficients(q as u64, |l| Complex64::new(l.powi(k as i32), 0.0), k.max(max_distance) + 2, 1e-15, 256)?;
                let poly = NcPolynomial::<f64>::laplacian_polynomial(&cf);
                for &y in &anchors {
                    let col = kernel_column_poly_masked(&tree, &poly, y)?;
                    for x in w.ball(y, max_distance) {
                        if !col.safe[x] {
                            continue;
                        }
                        pairs += 1;
                        let (abel, _) = homog_kernel_value(&radial, w.level(x), w.level(y), w.distance(x, y))?;
                        let dev = (abel - Complex64::new(col.get(x), 0.0)).norm();
                        worst = worst.max(dev);
                        if dev > 1e-10 {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
        rep.push(vec![k as f64, pairs as f64, worst, mismatches as f64]);
    }
    rep.meta("q", q);
    rep.meta("backend", backend);
    rep.meta("max_distance", max_distance);
    rep.meta("window_vertices", w.len());
    Ok(rep)
}

fn random_word_polynomial(rng: &mut ChaCha8Rng, degree: usize) -> NcPolynomial<BigRational> {
    let terms = rng.random_range(1..=4);
    let mut p = NcPolynomial::zero();
    for _ in 0..terms {
        let len = rng.random_range(0..=degree);
        let word: Vec<Letter> =
            (0..len).map(|_| if rng.random_bool(0.5) { Letter::Shift } else { Letter::Adjoint }).collect();
        let c = ratio(rng.random_range(-6..=6), rng.random_range(1..=5));
        p = p + NcPolynomial::monomial(word, c);
    }
    p
}

fn common_denominator(tree: &FlowTree) -> Result<usize> {
    let m = tree
        .measure
        .as_rational()
        .ok_or_else(|| Error::Backend("transference needs a rational target measure".into()))?;
    let w = &tree.window;
    let mut q = BigInt::one();
    for v in 0..w.len() {
        if let Some(p) = w.pred(v) {
            q = q.lcm((&m[v] / &m[p]).denom());
        }
    }
    q.to_usize().ok_or_else(|| Error::InvalidArgument("common denominator too large".into()))
}

/// Builds the submersion onto a rational target, validates it exactly, and
/// compares fiber-averaged source kernels with target kernels for `samples`
/// random word polynomials of degree at most `degree`.  Columns:
/// `sample, degree, pairs, mismatches`.
pub fn transfer_check(target: &FlowTree, anchor: VertexId, q: usize, samples: usize, degree: usize, seed: u64) -> Result<(EstimateReport, bool)> {
    let (source, s) = build_submersion_rational(target, q, DEFAULT_VERTEX_CAP)?;
    let report = validate_submersion(&source, target, &s);
    let ybar = s.map.iter().position(|&z| z == anchor).expect("surjective map");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = EstimateReport::new("transfer-check", &["sample", "degree", "pairs", "mismatches"]);
    for i in 0..samples {
        let poly = random_word_polynomial(&mut rng, degree);
        let src = kernel_column_poly_masked(&source, &poly, ybar)?;
        let avg = fiber_average_kernel(&source, target, &s, &src)?;
        let direct = kernel_column_poly_masked(target, &poly, anchor)?;
        let mut pairs = 0;
        let mut mismatches = 0;
        for x in 0..target.window.len() {
            if avg.safe[x] && direct.safe[x] {
                pairs += 1;
                if avg.get(x) != direct.get(x) {
                    mismatches += 1;
                }
            }
        }
        rep.push(vec![i as f64, poly.degree() as f64, pairs as f64, mismatches as f64]);
    }
    rep.meta("q", q);
    rep.meta("source_vertices", source.window.len());
    rep.meta("submersion_valid", report.is_valid());
    rep.meta("seed", seed);
    Ok((rep, report.is_valid()))
}

fn cmd_transfer(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let lt = load_tree(cfg, "ratios:3/4,1/4", 3, 3)?;
    let q = match cfg.q {
        Some(q) => q,
        None => common_denominator(&lt.tree)?,
    };
    let (mut rep, valid) =
        transfer_check(&lt.tree, lt.anchor, q, cfg.samples.unwrap_or(20), cfg.degree.unwrap_or(4), cfg.seed.unwrap_or(0))?;
    ctx.check(valid, "submersion", "validate_submersion reports violations".into());
    for r in &rep.rows {
        ctx.check(r[2] > 0.0 && r[3] == 0.0, "fiber-average", format!("sample {}: {} mismatches over {} pairs", r[0], r[3], r[2]));
    }
    ctx.write_report("", &mut rep, Some(&lt.summary))
}

fn cmd_rationalize(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let qs = cfg.q_grid.clone().or(cfg.q.map(|q| vec![q])).unwrap_or_else(|| vec![8, 64, 512]);
    let lt = load_tree(cfg, "golden", 5, 8)?;
    let (tree, root) = (&lt.tree, lt.anchor);
    let mut summary = Vec::new();
    for &q in &qs {
        let r = rationalize_flow(tree, q, root)?;
        let path = ctx.path(&format!("_q{q}.csv"))?;
        r.write_csv(&mut BufWriter::new(File::create(&path)?))?;
        ctx.artifacts.push(path);
        let off_bound = 1.0 / q as f64;
        let anchor_bound = (r.q0.max(2) - 1) as f64 / q as f64;
        ctx.check(
            r.max_off_anchor_error <= off_bound,
            "off-anchor-error",
            format!("q = {q}: {:e} > {off_bound:e}", r.max_off_anchor_error),
        );
        ctx.check(
            r.max_anchor_error <= anchor_bound,
            "anchor-error",
            format!("q = {q}: {:e} > {anchor_bound:e}", r.max_anchor_error),
        );
        summary.push(serde_json::json!({
            "q": q, "q0": r.q0, "max_off_anchor_error": r.max_off_anchor_error,
            "max_anchor_error": r.max_anchor_error,
        }));
    }
    let op = parse_operator(cfg.operator.as_deref().unwrap_or("poly:0,0,1"), cfg)?;
    let anchors = tree.window.ball(root, cfg.depth.unwrap_or(2));
    let rows = match &op {
        OperatorSpec::Polynomial(c) => {
            let cf: Vec<f64> = c.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
            let poly = NcPolynomial::<f64>::laplacian_polynomial(&cf);
            perturbation_probe(tree, root, &qs, ProbeOperator::Polynomial(&poly), &anchors)?
        }
        OperatorSpec::Multiplier { .. } => {
            let model = cheb_approx(|l| op.function()(l), cfg.degree.unwrap_or(4))?;
            perturbation_probe(tree, root, &qs, ProbeOperator::Model(&model), &anchors)?
        }
    };
    for p in rows.windows(2) {
        ctx.check(
            p[1].max_deviation <= p[0].max_deviation,
            "monotone-deviation",
            format!("q = {} → {}: {:e} → {:e}", p[0].q, p[1].q, p[0].max_deviation, p[1].max_deviation),
        );
    }
    let path = ctx.path(".csv")?;
    write_perturbation_csv(&rows, &mut BufWriter::new(File::create(&path)?))?;
    ctx.artifacts.push(path);
    ctx.write_sidecar(
        "",
        serde_json::json!({
            "window": lt.summary, "operator": op.name(), "rationalizations": summary, "perturbation": rows,
        }),
    )
}

fn cmd_weighted(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let ts = t_grid(cfg, "1,4,16,64")?;
    let eps = cfg.epsilon.unwrap_or(1.0);
    if cfg.tree.is_some() || cfg.tree_inline.is_some() {
        let tmax = ts.iter().cloned().fold(1.0, f64::max);
        let lt = load_tree(cfg, "homogeneous", 1, heat_degree(tmax, HEAT_TOL) + 8)?;
        let mut rep = weighted_heat_sweep_tree(&lt.tree, &[lt.anchor], eps, &ts)?;
        return ctx.write_report("", &mut rep, Some(&lt.summary));
    }
    let qs = cfg.q_grid.clone().or(cfg.q.map(|q| vec![q])).unwrap_or_else(|| vec![2, 3, 5]);
    let mut rep = weighted_heat_sweep(&qs, eps, &ts)?;
    ctx.write_report("", &mut rep, None)
}

fn cmd_level_sum(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let ts = t_grid(cfg, "1:128:8:log")?;
    let tmax = ts.iter().cloned().fold(1.0, f64::max);
    let lt = load_tree(cfg, "homogeneous", 1, heat_degree(tmax, HEAT_TOL) + 8)?;
    let anchors = if cfg.tree.is_some() || cfg.tree_inline.is_some() {
        vec![lt.anchor]
    } else {
        lt.tree.window.ball(lt.anchor, 1)
    };
    let mut rep = level_sum_estimate(&lt.tree, &anchors, &ts, cfg.level)?;
    ctx.write_report("", &mut rep, Some(&lt.summary))
}

fn cmd_mh(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let q = cfg.q.unwrap_or(2) as u64;
    let levels: Vec<u32> = (0..=cfg.depth.unwrap_or(6) as u32).collect();
    let f = match cfg.operator.as_deref() {
        None => imaginary_power_multiplier(cfg.alpha.unwrap_or(1.0)),
        Some(text) if text.replace(' ', "").starts_with("x^{i*") => {
            let OperatorSpec::Multiplier { name, .. } = parse_operator(text, cfg)? else { unreachable!() };
            let a: f64 = name["x^{i*".len()..name.len() - 1].parse().unwrap_or(1.0);
            imaginary_power_multiplier(a)
        }
        Some(text) => parse_operator(text, cfg)?.function(),
    };
    let mut rep = mh_dyadic_norms(q, f, &levels, cfg.epsilon.unwrap_or(1.0))?;
    rep.meta("operator", cfg.operator.clone().unwrap_or_else(|| "x^{i*alpha}".into()));
    ctx.write_report("", &mut rep, None)
}

fn cmd_sharpness(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let q = cfg.q.unwrap_or(2) as u64;
    let ts = t_grid(cfg, "10:40:7:log")?;
    if ts.iter().any(|t| *t <= 0.0) {
        return Err(Error::InvalidArgument("sharpness times must be positive".into()));
    }
    let mut rep = sharpness_fit(q, &ts)?;
    ctx.write_report("", &mut rep, None)?;
    let s_grid = cfg.s_grid.clone().unwrap_or_else(|| vec![1.0, 2.0]);
    let t_min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let sobolev_grid = log_grid(t_min, t_max.max(32.0 * t_min), 6);
    let mut sob = sobolev_proxy(&sobolev_grid, &s_grid);
    ctx.write_report("_sobolev", &mut sob, None)
}

fn cmd_divergence(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let ds = cfg.d_grid.clone().unwrap_or_else(|| vec![16, 32, 64, 128]);
    let dmax = ds.iter().copied().max().unwrap_or(1);
    let (tree, x1, summary) = if cfg.tree.is_some() || cfg.tree_inline.is_some() {
        let lt = load_tree(cfg, "integers", 1, 1)?;
        (lt.tree, lt.anchor, Some(lt.summary))
    } else {
        (path_window(dmax + 2, 0)?, 1, None)
    };
    let mut rep = divergence_probe(&tree, x1, &ds)?;
    ctx.write_report("", &mut rep, summary.as_ref())
}

fn cmd_spectrum(ctx: &mut Context<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let thetas = cfg.thetas.clone().unwrap_or_else(|| vec![0.0, PI / 3.0, PI]);
    let ds = cfg.d_grid.clone().unwrap_or_else(|| vec![10, 20, 50, 100, 200]);
    let dmax = ds.iter().copied().max().unwrap_or(1);
    let (tree, o, summary) = if cfg.tree.is_some() || cfg.tree_inline.is_some() {
        let lt = load_tree(cfg, "integers", 1, 1)?;
        (lt.tree, lt.anchor, Some(lt.summary))
    } else {
        (path_window(dmax + 3, 0)?, 1, None)
    };
    let mut rep = spectrum_probe(&tree, o, &thetas, &ds)?;
    if tree.window.len() <= crate::analysis::DENSE_SPECTRUM_LIMIT {
        let ev = compressed_spectrum(&tree)?;
        let (lo, hi) = (ev[0], *ev.last().unwrap_or(&0.0));
        ctx.check(lo >= -1e-10 && hi <= 2.0 + 1e-10, "spectrum-range", format!("eigenvalues span [{lo:e}, {hi:e}]"));
        rep.meta("eigenvalue_min", lo);
        rep.meta("eigenvalue_max", hi);
    }
    ctx.write_report("", &mut rep, summary.as_ref())
}

/// Per-key summary of the fits of a report, for printing.
pub fn fit_summary(rep: &EstimateReport) -> BTreeMap<String, f64> {
    rep.fits.iter().map(|(k, f)| (k.clone(), f.slope)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_grid("1:100:3(log)").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(parse_grid("1:100:3:log").unwrap(), g);
        assert_eq!(parse_grid("1, 4,16").unwrap(), vec![1.0, 4.0, 16.0]);
        assert!(parse_grid("1:x:3").is_err());
    }

    #[test]
    fn operators_parse() {
        let cfg = ExperimentConfig { t: Some(2.0), alpha: Some(1.0), power: Some(3), ..Default::default() };
        assert!(matches!(parse_operator("poly:0,1/2", &cfg).unwrap(), OperatorSpec::Polynomial(c) if c.len() == 2));
        assert!(matches!(parse_operator("x^k", &cfg).unwrap(), OperatorSpec::Polynomial(c) if c.len() == 4));
        let f = parse_operator("exp(-t*x)", &cfg).unwrap().function();
        assert!((f(1.0).re - (-2f64).exp()).abs() < 1e-15);
        assert!(parse_operator("x^{i*alpha}", &cfg).is_ok());
        assert!(parse_operator("schrodinger(t)", &cfg).is_ok());
        assert!(parse_operator("sin(x)", &cfg).is_err());
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = ExperimentConfig::from_json(r#"{"command":"abel-check","q":2,"degree":4}"#).unwrap();
        let flags = ExperimentConfig { q: Some(3), ..Default::default() };
        let merged = file.overlay(&flags).unwrap();
        assert_eq!(merged.q, Some(3));
        assert_eq!(merged.degree, Some(4));
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn abel_check_is_exact() {
        let rep = abel_direct_check(2, 3, 4, Backend::Rational).unwrap();
        assert!(rep.rows.iter().all(|r| r[1] > 0.0 && r[3] == 0.0), "{:?}", rep.rows);
    }
}
