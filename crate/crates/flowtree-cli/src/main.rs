use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flowtree::experiment::{run, ExperimentConfig, RunStatus, COMMANDS};
use flowtree::tree::Backend;

/// Kernels and estimates for flow Laplacians on trees.
#[derive(Parser, Debug)]
#[command(name = "flowtree", version, about)]
struct Cli {
    /// One of: kernel, heat, riesz, riesz-skew-check, abel-check, transfer-check,
    /// rationalize, weighted-sweep, level-sum, mh-norms, sharpness, divergence, spectrum.
    command: Option<String>,
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tree-description file or built-in window (golden, homogeneous, integers, ratios:r1,r2,…).
    #[arg(long)]
    tree: Option<String>,
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    /// Comma-separated list of q values.
    #[arg(long, value_delimiter = ',')]
    q_grid: Option<Vec<usize>>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    up: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// `a:b:n`, `a:b:n(log)` or a comma list.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    level: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    power: Option<u32>,
    /// `poly:c0,c1,…`, `exp(-t*x)`, `x^k`, `x^{i*alpha}` or `schrodinger(t)`.
    #[arg(long)]
    operator: Option<String>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: flowtree::Error| e.to_string())
}

impl Cli {
    fn flags(self) -> ExperimentConfig {
        ExperimentConfig {
            command: self.command,
            tree: self.tree,
            tree_inline: None,
            anchor: self.anchor,
            q: self.q,
            q_grid: self.q_grid,
            depth: self.depth,
            radius: self.radius,
            up: self.up,
            degree: self.degree,
            t_grid: self.t_grid,
            d_grid: self.d_grid,
            thetas: self.thetas,
            s_grid: self.s_grid,
            level: self.level,
            alpha: self.alpha,
            epsilon: self.epsilon,
            tol: self.tol,
            t: self.t,
            power: self.power,
            operator: self.operator,
            backend: self.backend,
            samples: self.samples,
            seed: self.seed,
            out: self.out,
            jobs: self.jobs,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let file = cli.config.clone();
    let flags = cli.flags();
    let config = match file {
        Some(path) => ExperimentConfig::load(&path).and_then(|base| base.overlay(&flags)),
        None => Ok(flags),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RunStatus::SchemaError.code() as u8);
        }
    };
    if config.command.is_none() {
        eprintln!("error: no command given; expected one of {}", COMMANDS.join(", "));
        return ExitCode::from(RunStatus::SchemaError.code() as u8);
    }
    let outcome = run(&config);
    for f in &outcome.failures {
        eprintln!("{}: {}: {}", f.command, f.check, f.detail);
    }
    for a in &outcome.artifacts {
        println!("{}", a.display());
    }
    ExitCode::from(outcome.status.code() as u8)
}
