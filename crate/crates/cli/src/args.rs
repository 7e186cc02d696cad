//! Command-line interface. Every subcommand turns into an [`ExperimentSpec`].

use std::path::PathBuf;

use blab_core::bellman::OMEGA_TOL;
use blab_core::{BellmanParams, SearchConfig, TreeSpec};
use clap::{Args, Parser, Subcommand};

use crate::artifact::Format;
use crate::error::{CliError, CliResult};
use crate::fuzz::Generator;
use crate::spec::{ExperimentSpec, FuzzSpec, Kind, ScanSpec};

#[derive(Debug, Parser)]
#[command(name = "blab", version, about = "Bellman function of the tree maximal operator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form Bellman function and its concavity.
    #[command(subcommand)]
    Bellman(BellmanCmd),
    /// Near-extremal search and its diagnostics.
    #[command(subcommand)]
    Extremal(ExtremalCmd),
    /// Randomized checks of the weak-type inequality.
    #[command(subcommand)]
    Fuzz(FuzzCmd),
    /// Run an experiment described by a JSON file.
    Run(RunArgs),
}

#[derive(Debug, Subcommand)]
pub enum BellmanCmd {
    /// Print `S_p(f, F)`, `ω_p(f^p/F)` and `f^p/F`.
    Eval(EvalArgs),
    /// Second differences of `G(t) = t ω_p(1/t)^p` on a uniform grid.
    ScanConcavity(ScanArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExtremalCmd {
    /// Search for a near-extremal function and write its report.
    Search(SearchArgs),
    /// Per-node localization and slack table for a saved report.
    Audit(AuditArgs),
    /// Near-extremal trends over the trace of a saved report.
    Trend(TrendArgs),
}

#[derive(Debug, Subcommand)]
pub enum FuzzCmd {
    /// Count weak-type violations over random functions and thresholds.
    WeakType(FuzzArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct Moments {
    #[arg(long = "p")]
    pub p: f64,
    #[arg(long = "f")]
    pub f: f64,
    #[arg(long = "F")]
    pub big_f: f64,
}

impl Moments {
    fn params(&self) -> BellmanParams {
        BellmanParams { p: self.p, f: self.f, big_f: self.big_f }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub moments: Moments,
    #[arg(long, default_value_t = OMEGA_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long = "p")]
    pub p: f64,
    #[arg(long)]
    pub tmin: f64,
    #[arg(long)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub moments: Moments,
    #[arg(long, default_value_t = SearchConfig::default().depth)]
    pub depth: usize,
    #[arg(long, default_value_t = SearchConfig::default().arity)]
    pub arity: usize,
    #[arg(long, default_value_t = SearchConfig::default().restarts)]
    pub restarts: usize,
    /// Iteration budget per tree level.
    #[arg(long, default_value_t = SearchConfig::default().max_iters)]
    pub iters: usize,
    #[arg(long, default_value_t = SearchConfig::default().step_init)]
    pub step_init: f64,
    #[arg(long, default_value_t = SearchConfig::default().tol_moments)]
    pub tol_moments: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub levels: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub lambdas: usize,
    #[arg(long, default_value_t = Generator::default().tail_index)]
    pub tail_index: f64,
    #[arg(long, default_value_t = Generator::default().sparsity)]
    pub sparsity: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Overrides the seed of the search or fuzz run.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn with_output(mut spec: ExperimentSpec, output: Output) -> ExperimentSpec {
    spec.output.path = output.out;
    spec.output.format = output.format;
    spec
}

impl Command {
    pub fn into_spec(self) -> CliResult<ExperimentSpec> {
        let spec = match self {
            Command::Bellman(BellmanCmd::Eval(a)) => with_output(
                ExperimentSpec {
                    params: Some(a.moments.params()),
                    tol: Some(a.tol),
                    ..ExperimentSpec::new(Kind::BellmanEval)
                },
                a.output,
            ),
            Command::Bellman(BellmanCmd::ScanConcavity(a)) => with_output(
                ExperimentSpec {
                    scan: Some(ScanSpec { p: Some(a.p), tmin: a.tmin, tmax: a.tmax, n: a.n }),
                    ..ExperimentSpec::new(Kind::ConcavityScan)
                },
                a.output,
            ),
            Command::Extremal(ExtremalCmd::Search(a)) => with_output(
                ExperimentSpec {
                    params: Some(a.moments.params()),
                    search: Some(SearchConfig {
                        depth: a.depth,
                        arity: a.arity,
                        restarts: a.restarts,
                        max_iters: a.iters,
                        step_init: a.step_init,
                        seed: a.seed,
                        tol_moments: a.tol_moments,
                    }),
                    ..ExperimentSpec::new(Kind::ExtremalSearch)
                },
                a.output,
            ),
            Command::Extremal(ExtremalCmd::Audit(a)) => with_output(
                ExperimentSpec {
                    input: Some(a.input),
                    levels: Some(a.levels),
                    ..ExperimentSpec::new(Kind::ExtremalAudit)
                },
                a.output,
            ),
            Command::Extremal(ExtremalCmd::Trend(a)) => with_output(
                ExperimentSpec { input: Some(a.input), ..ExperimentSpec::new(Kind::LocalizationTrend) },
                a.output,
            ),
            Command::Fuzz(FuzzCmd::WeakType(a)) => with_output(
                ExperimentSpec {
                    tree_spec: Some(TreeSpec::Uniform { arity: a.arity, depth: a.depth }),
                    fuzz: Some(FuzzSpec {
                        count: a.count,
                        seed: a.seed,
                        lambdas: a.lambdas,
                        generator: Generator { tail_index: a.tail_index, sparsity: a.sparsity },
                    }),
                    ..ExperimentSpec::new(Kind::WeakTypeFuzz)
                },
                a.output,
            ),
            Command::Run(a) => {
                let mut spec = ExperimentSpec::load(&a.config)?;
                if let Some(out) = a.out {
                    spec.output.path = Some(out);
                }
                if let Some(format) = a.format {
                    spec.output.format = Some(format);
                }
                if let Some(seed) = a.seed {
                    spec.override_seed(seed);
                }
                spec
            }
        };
        Ok(spec)
    }
}

/// Reads `BLAB_THREADS`; `None` when unset.
pub fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var("BLAB_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!("BLAB_THREADS = {v:?} is not a positive integer"))),
        },
        Err(e) => Err(CliError::usage(format!("BLAB_THREADS: {e}"))),
    }
}
