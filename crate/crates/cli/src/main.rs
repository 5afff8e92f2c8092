//! `reflectron` command-line front end.
//!
//! Every experiment flag has the same name as the corresponding key in the
//! TOML file passed with `--config`; flags win over file values.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use reflectron::bounds::{
    bound_corollary, bound_theorem4, eta_bound, rademacher_linear, BoundInputs, CorollaryKind, EtaRegime,
};
use reflectron::harness::config::ExperimentConfig;
use reflectron::harness::data::sample_sparse_task;
use reflectron::harness::gram::gram_norm_diagnostic;
use reflectron::harness::output::{summarize, write_records, write_summary, write_trace};
use reflectron::harness::sweep::{
    run_lowrank_experiment, run_sweep, sort_records, Algorithm, LowRankOptions, ResultRecord, SweepGrid,
    SUPPORT_THRESHOLD,
};
use reflectron::linalg::{l1_norm, lp_norm};
use reflectron::matrixglm::{fit_spectral_with_holdout, matrix_empirical_risk, nuclear_norm, simulate};
use reflectron::model::{evaluate, XiMode};
use reflectron::projection::ConstraintSet;
use reflectron::trainer::{fit_full_batch_with_holdout, ReflectronConfig};
use reflectron::geometry::Potential;

#[derive(Parser)]
#[command(name = "reflectron", version, about = "Reflectron training, sweeps and bound evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and report its metrics.
    Fit(FitArgs),
    /// Sweep the hyperparameter grid on one sparse-vector task.
    Sweep(ExperimentArgs),
    /// Run one of the synthetic experiment suites over several training sizes.
    Experiment {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Monte-Carlo Frobenius and operator norms of the Gram matrix at n = d.
    GramNorms(GramArgs),
    /// Evaluate a generalization bound.
    Bound(BoundArgs),
}

#[derive(Subcommand)]
enum Suite {
    SparseVector(ExperimentArgs),
    LowRank(ExperimentArgs),
}

/// Flags mirroring the configuration file keys.
#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// TOML file with any of the keys below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long = "n_train", alias = "n-train")]
    n_train: Option<usize>,
    #[arg(long = "n_holdout", alias = "n-holdout")]
    n_holdout: Option<usize>,
    #[arg(long = "n_test", alias = "n-test")]
    n_test: Option<usize>,
    #[arg(long = "n_values", alias = "n-values", value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    /// Half-width of the uniform noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    project: Option<bool>,
    #[arg(long, value_parser = parse_xi)]
    xi: Option<XiMode>,
    /// Result CSV; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON summary; standard error when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let flags = ExperimentConfig {
            d: self.d,
            sparsity: self.sparsity,
            rank: self.rank,
            n_train: self.n_train,
            n_holdout: self.n_holdout,
            n_test: self.n_test,
            n_values: self.n_values.clone(),
            noise: self.noise,
            rho: self.rho,
            horizon: self.horizon,
            seed: self.seed,
            lambdas: self.lambdas.clone(),
            betas: self.betas.clone(),
            ps: self.ps.clone(),
            algorithms: self.algorithms.clone(),
            trials: self.trials,
            iterations: self.iterations,
            project: self.project,
            xi: self.xi,
            output: self.output.clone(),
            summary: self.summary.clone(),
        };
        let base = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(flags))
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: reflectron::Error| e.to_string())
}

fn parse_xi(s: &str) -> Result<XiMode, String> {
    match s {
        "one" => Ok(XiMode::One),
        "derivative" => Ok(XiMode::Derivative),
        other => Err(format!("xi must be \"one\" or \"derivative\", got {other:?}")),
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskKind {
    SparseVector,
    LowRank,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, value_enum, default_value = "sparse-vector")]
    task: TaskKind,
    #[arg(long, value_parser = parse_algorithm, default_value = "glmtron")]
    algorithm: Algorithm,
    #[arg(long)]
    lambda: f64,
    /// Required for hypentropy.
    #[arg(long)]
    beta: Option<f64>,
    /// Required for pnorm.
    #[arg(long)]
    p: Option<f64>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Theorem4,
    Pq,
    Global,
    Simplex,
    Eta,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[arg(long)]
    n: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Lipschitz constant of the activation.
    #[arg(long = "lipschitz", default_value_t = 0.25)]
    l: f64,
    /// Bound on the dual norm of the features.
    #[arg(long = "feature-bound")]
    c: Option<f64>,
    /// Bound on the primal norm of the parameter.
    #[arg(long = "param-bound")]
    w: Option<f64>,
    /// Bound on ξ.
    #[arg(long = "xi-bound", default_value_t = 1.0)]
    b: f64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "psi-theta")]
    psi_theta: Option<f64>,
    #[arg(long)]
    dim: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Rademacher complexity; computed from C, W, σ and n when absent.
    #[arg(long)]
    rademacher: Option<f64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => fit(&args),
        Command::Sweep(args) => sweep(&args.flags),
        Command::Experiment { suite: Suite::SparseVector(args) } => sparse_experiment(&args.flags),
        Command::Experiment { suite: Suite::LowRank(args) } => lowrank_experiment(&args.flags),
        Command::GramNorms(args) => gram(&args),
        Command::Bound(args) => bound(&args),
    }
}

fn sink(path: Option<&Path>, fallback: impl Write + 'static) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(fallback),
    })
}

fn emit_records(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<()> {
    write_records(sink(cfg.output.as_deref(), io::stdout())?, records)?;
    let mut out = sink(cfg.summary.as_deref(), io::stderr())?;
    write_summary(&mut out, &summarize(records))?;
    writeln!(out)?;
    Ok(())
}

fn sweep(flags: &ConfigFlags) -> Result<()> {
    let cfg = flags.resolve()?;
    let records = run_sweep(&cfg.sparse_task()?, &cfg.sweep_grid(SweepGrid::sparse_vector())?)?;
    emit_records(&cfg, &records)
}

fn sample_sizes(cfg: &ExperimentConfig, default: usize) -> Vec<usize> {
    cfg.n_values.clone().unwrap_or_else(|| vec![cfg.n_train.unwrap_or(default)])
}

fn sparse_experiment(flags: &ConfigFlags) -> Result<()> {
    let cfg = flags.resolve()?;
    let grid = cfg.sweep_grid(SweepGrid::sparse_vector())?;
    let base = cfg.sparse_task()?;
    let mut records = Vec::new();
    for n in sample_sizes(&cfg, base.n_train) {
        let task = reflectron::harness::data::SparseTaskSpec { n_train: n, ..base.clone() };
        records.extend(run_sweep(&task, &grid)?);
    }
    sort_records(&mut records);
    emit_records(&cfg, &records)
}

fn lowrank_experiment(flags: &ConfigFlags) -> Result<()> {
    let cfg = flags.resolve()?;
    let grid = cfg.sweep_grid(SweepGrid::low_rank())?;
    let spec = cfg.system_spec()?;
    let base = cfg.lowrank_options();
    let mut records = Vec::new();
    for n in sample_sizes(&cfg, base.n_train) {
        records.extend(run_lowrank_experiment(&spec, &LowRankOptions { n_train: n, ..base.clone() }, &grid)?);
    }
    sort_records(&mut records);
    emit_records(&cfg, &records)
}

fn potential_for(algorithm: Algorithm, beta: Option<f64>, p: Option<f64>) -> Result<Potential> {
    Ok(match algorithm {
        Algorithm::Glmtron => Potential::euclidean(),
        Algorithm::Pnorm => Potential::pnorm(p.context("--p is required for pnorm")?)?,
        Algorithm::Hypentropy => Potential::hypentropy(beta.context("--beta is required for hypentropy")?)?,
    })
}

/// Ball of radius `2‖·‖` around the truth, as in the sweeps.
fn constraint_for(algorithm: Algorithm, p: Option<f64>, spectral: bool, norm: impl Fn(f64) -> f64) -> ConstraintSet {
    match (algorithm, p, spectral) {
        (Algorithm::Pnorm, Some(p), false) => ConstraintSet::LpBall { p, radius: 2.0 * norm(p) },
        (Algorithm::Pnorm, Some(p), true) => ConstraintSet::SpectralLp { p, radius: 2.0 * norm(p) },
        (_, _, false) => ConstraintSet::L1Ball { radius: 2.0 * norm(1.0) },
        (_, _, true) => ConstraintSet::SpectralL1 { radius: 2.0 * norm(1.0) },
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    if !(args.lambda > 0.0) {
        bail!("--lambda must be positive");
    }
    let potential = potential_for(args.algorithm, args.beta, args.p)?;
    let iterations = cfg.iterations.unwrap_or(5000);
    let project = cfg.project.unwrap_or(true);
    let train_cfg = |constraint: ConstraintSet| {
        ReflectronConfig::new(potential.clone(), args.lambda, iterations)
            .with_xi(cfg.xi.unwrap_or_default())
            .with_seed(cfg.seed.unwrap_or(0))
            .with_constraint(if project { constraint } else { ConstraintSet::Unconstrained })
    };
    let started = Instant::now();
    let (summary, trace_rows) = match args.task {
        TaskKind::SparseVector => {
            let task = sample_sparse_task(&cfg.sparse_task()?)?;
            let rc = train_cfg(constraint_for(args.algorithm, args.p, false, |p| lp_norm(task.theta.as_slice(), p)));
            let trace = fit_full_batch_with_holdout(&rc, &task.train, &task.holdout)?;
            let params = &trace.best_params;
            let test = evaluate(params, &task.test, &rc.activation, rc.xi, false)?;
            let summary = serde_json::json!({
                "task": "sparse_vector",
                "algorithm": args.algorithm,
                "lambda": args.lambda,
                "beta": args.beta,
                "p": args.p,
                "iterations": iterations,
                "best_iteration": trace.best_iteration,
                "train_risk": trace.best_iteration.checked_sub(1).map(|i| trace.train_risk[i]),
                "holdout_risk": trace.best_holdout_risk(),
                "test_risk": test.excess.unwrap_or(test.err),
                "l1_error": l1_norm((params - &task.theta).as_slice()),
                "support_count": params.iter().filter(|v| v.abs() > SUPPORT_THRESHOLD).count(),
                "seconds": started.elapsed().as_secs_f64(),
            });
            (summary, trace_csv(&trace)?)
        }
        TaskKind::LowRank => {
            let spec = cfg.system_spec()?;
            let opts = cfg.lowrank_options();
            let total = opts.n_train + opts.n_holdout + opts.n_test;
            let all = simulate(&spec, total, opts.seed)?;
            let idx = |lo: usize, hi: usize| (lo..hi).collect::<Vec<_>>();
            let (a, b) = (opts.n_train, opts.n_train + opts.n_holdout);
            let (train, hold, test) = (all.subset(&idx(0, a))?, all.subset(&idx(a, b))?, all.subset(&idx(b, total))?);
            let sv = spec.singular_values();
            let rc = train_cfg(constraint_for(args.algorithm, args.p, true, |p| lp_norm(sv.as_slice(), p)));
            let trace = fit_spectral_with_holdout(&rc, &train, &hold, &spec)?;
            let params = &trace.best_params;
            let summary = serde_json::json!({
                "task": "low_rank",
                "algorithm": args.algorithm,
                "lambda": args.lambda,
                "beta": args.beta,
                "p": args.p,
                "iterations": iterations,
                "best_iteration": trace.best_iteration,
                "train_risk": matrix_empirical_risk(params, &train, &spec)?,
                "holdout_risk": trace.best_holdout_risk(),
                "test_risk": matrix_empirical_risk(params, &test, &spec)?,
                "nuclear_error": nuclear_norm(&(params - &spec.theta))?,
                "seconds": started.elapsed().as_secs_f64(),
            });
            (summary, trace_csv(&trace)?)
        }
    };
    if let Some(path) = &args.trace {
        std::fs::write(path, trace_rows).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = sink(cfg.summary.as_deref(), io::stdout())?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    Ok(())
}

fn trace_csv<P>(trace: &reflectron::trainer::TrainTrace<P>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    Ok(buf)
}

fn gram(args: &GramArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(args.output.as_deref(), io::stdout())?);
    for &d in &args.dims {
        w.serialize(gram_norm_diagnostic(d, d, args.trials, args.seed)?)?;
    }
    w.flush()?;
    Ok(())
}

fn bound(args: &BoundArgs) -> Result<()> {
    let inputs = BoundInputs {
        l: Some(args.l),
        c: args.c,
        w: args.w,
        b: Some(args.b),
        sigma: args.sigma,
        gamma: args.gamma,
        eta: args.eta,
        psi_theta: args.psi_theta,
        d: args.dim,
        q: args.q,
        ..BoundInputs::new(args.n, args.delta)
    };
    let value = match args.kind {
        BoundKind::Theorem4 => {
            let rad = match args.rademacher {
                Some(r) => r,
                None => rademacher_linear(
                    args.c.context("--feature-bound is required")?,
                    args.w.context("--param-bound is required")?,
                    args.sigma.context("--sigma is required")?,
                    args.n,
                ),
            };
            bound_theorem4(&inputs, rad)?
        }
        BoundKind::Pq => bound_corollary(CorollaryKind::Pq, &inputs)?,
        BoundKind::Global => bound_corollary(CorollaryKind::Global, &inputs)?,
        BoundKind::Simplex => bound_corollary(CorollaryKind::Simplex, &inputs)?,
        BoundKind::Eta => {
            let c = args.c.context("--feature-bound is required")?;
            let regime = match (args.q, args.dim) {
                (Some(q), _) => EtaRegime::PIn2Inf { q },
                (None, Some(d)) => EtaRegime::Infinity { d },
                (None, None) => bail!("eta needs --q or --dim"),
            };
            eta_bound(c, args.n, args.delta, regime)?
        }
    };
    println!("{}", serde_json::json!({ "kind": args.kind.to_possible_value().map(|v| v.get_name().to_string()), "inputs": inputs, "value": value }));
    Ok(())
}
