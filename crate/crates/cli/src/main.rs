//! `rwre-lab`: command-line driver over `rwre_core::experiment`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rwre_core::curve::Measure;
use rwre_core::experiment::{self, exit, ExperimentRecipe, Params, RecipeKind};
use rwre_core::fit::{EstimatorKind, FitWindow};

#[derive(Parser)]
#[command(name = "rwre-lab", version, about = "Random walks in random environments among soft obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Site-law spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// New run directory; refused if it exists.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct Tail {
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    /// Ratio of consecutive checkpoints.
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Quenched,
    Annealed,
    MixedTheta,
    MixedOmega,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Quenched => Measure::Quenched,
            MeasureArg::Annealed => Measure::Annealed,
            MeasureArg::MixedTheta => Measure::MixedTheta,
            MeasureArg::MixedOmega => Measure::MixedOmega,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    LoglogSlope,
    DoubleLogRatio,
}

#[derive(Subcommand)]
enum Command {
    /// Check ellipticity and nestling of a spec.
    Validate(Common),
    /// Tail exponents predicted for a spec.
    Exponents(Common),
    /// Sample an environment on a cube.
    GenEnv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radius: Option<u64>,
    },
    /// List potential traps of a sampled one-dimensional environment.
    TrapScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radius: Option<u64>,
        /// Minimal trap depth.
        #[arg(long)]
        depth: Option<f64>,
    },
    /// Exact survival brackets (quenched) or their average (annealed).
    ExactTail {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tail: Tail,
        #[arg(long)]
        envs: Option<u64>,
        /// Largest acceptable relative bracket gap.
        #[arg(long)]
        gap_tol: Option<f64>,
    },
    /// Monte Carlo survival curve.
    McTail {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tail: Tail,
        #[arg(long)]
        walkers: Option<u64>,
    },
    /// Frequency of deep traps at the origin.
    TrapFrequency {
        #[command(flatten)]
        common: Common,
        /// Depth per unit `ln n`.
        #[arg(long)]
        depth: f64,
        #[arg(long)]
        b1: f64,
        #[arg(long)]
        b2: f64,
        #[arg(long)]
        n_max: u64,
        #[arg(long)]
        envs: u64,
    },
    /// Fit a tail exponent to a curve from an earlier run.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Run directory holding `curve.json`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        #[arg(long)]
        n_lo: Option<u64>,
        #[arg(long)]
        n_hi: Option<u64>,
        #[arg(long)]
        theory: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Merge runs into a theory-vs-empirical table.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Allow runs on different specs.
        #[arg(long)]
        cross_spec: bool,
        runs: Vec<PathBuf>,
    },
    /// Re-run a stored manifest into a new directory.
    Rerun {
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a JSON recipe file.
    Run { recipe: PathBuf },
}

fn recipe(kind: RecipeKind, c: Common, params: Params) -> ExperimentRecipe {
    ExperimentRecipe { kind, spec: c.spec, params: Params { seed: c.seed, ..params }, out: c.out, workers: c.workers }
}

fn tail_params(t: Tail) -> Params {
    Params { n_max: t.n_max, measure: t.measure.map(Into::into), ratio: t.ratio, ..Params::default() }
}

fn dispatch(command: Command) -> rwre_core::Result<experiment::RunOutcome> {
    let r = match command {
        Command::Validate(c) => recipe(RecipeKind::Validate, c, Params::default()),
        Command::Exponents(c) => recipe(RecipeKind::Exponents, c, Params::default()),
        Command::GenEnv { common, radius } => recipe(RecipeKind::GenEnv, common, Params { radius, ..Params::default() }),
        Command::TrapScan { common, radius, depth } => {
            recipe(RecipeKind::TrapScan, common, Params { radius, depth, ..Params::default() })
        }
        Command::ExactTail { common, tail, envs, gap_tol } => {
            recipe(RecipeKind::ExactTail, common, Params { n_envs: envs, gap_tol, ..tail_params(tail) })
        }
        Command::McTail { common, tail, walkers } => {
            recipe(RecipeKind::McTail, common, Params { walkers, ..tail_params(tail) })
        }
        Command::TrapFrequency { common, depth, b1, b2, n_max, envs } => recipe(
            RecipeKind::TrapFrequency,
            common,
            Params {
                depth: Some(depth),
                b1: Some(b1),
                b2: Some(b2),
                n_max: Some(n_max),
                n_envs: Some(envs),
                ..Params::default()
            },
        ),
        Command::Fit { common, input, estimator, n_lo, n_hi, theory, tolerance, replicas } => {
            let window = match (n_lo, n_hi) {
                (Some(lo), Some(hi)) => Some(FitWindow::new(lo, hi)),
                (None, None) => None,
                _ => {
                    return Err(rwre_core::Error::Domain("give both --n-lo and --n-hi or neither".into()));
                }
            };
            let estimator = estimator.map(|e| match e {
                EstimatorArg::LoglogSlope => EstimatorKind::LoglogSlope,
                EstimatorArg::DoubleLogRatio => EstimatorKind::DoubleLogRatio,
            });
            recipe(
                RecipeKind::Fit,
                common,
                Params { input: Some(input), estimator, window, theory, tolerance, replicas, ..Params::default() },
            )
        }
        Command::Report { out, cross_spec, runs } => ExperimentRecipe {
            kind: RecipeKind::Report,
            spec: None,
            params: Params { runs, cross_spec, ..Params::default() },
            out,
            workers: None,
        },
        Command::Rerun { run, out, workers } => return experiment::rerun(&run, &out, workers),
        Command::Run { recipe } => {
            let text = std::fs::read_to_string(&recipe)?;
            let r: ExperimentRecipe = serde_json::from_str(&text)
                .map_err(|e| rwre_core::Error::Parse { line: e.line(), msg: e.to_string() })?;
            r
        }
    };
    experiment::run(&r)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { exit::PARSE as u8 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("run directory {}", outcome.dir.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("rwre-lab: {err}");
            ExitCode::from(experiment::exit_code(&err) as u8)
        }
    }
}
