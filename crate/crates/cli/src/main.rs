use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noisy_sort::harness::{
    emit_rate_curves, parse_p_grid, run_experiment, verify_suite, write_sort_sim, Algorithm,
    ExperimentConfig, Scope, TruthSource,
};
use noisy_sort::info::DEFAULT_DELTA_GRID;
use noisy_sort::{CrossoverProb, Error};

const EXIT_INVALID: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "noisy-sort",
    version,
    about = "Noisy sorting experiments and rate curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the rate curves on a grid of crossover probabilities.
    Rates {
        /// Grid as start:stop:step, e.g. 0:0.49:0.01
        #[arg(long)]
        p_grid: String,
        /// Number of delta values per spacing in the tree-sorter optimizer.
        #[arg(long, default_value_t = DEFAULT_DELTA_GRID)]
        delta_grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded Monte Carlo sorting experiment.
    SortSim(SortSimArgs),
    /// Run the property checks and print their margins.
    Verify {
        #[arg(long, value_enum, default_value_t = ScopeArg::Fast)]
        scope: ScopeArg,
    },
}

#[derive(Args)]
struct SortSimArgs {
    #[arg(long, value_enum)]
    alg: Alg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    /// Sorting rate (fixed and nst).
    #[arg(long, conflicts_with = "pe")]
    rate: Option<f64>,
    /// Overall error tolerance (variable).
    #[arg(long)]
    pe: Option<f64>,
    /// Per-node failure target (nst).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Fixed,
    Variable,
    Nst,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Fast,
    Full,
}

fn sort_config(a: &SortSimArgs) -> Result<ExperimentConfig, Error> {
    let (algorithm, param) = match (a.alg, a.rate, a.pe) {
        (Alg::Fixed, Some(r), None) => (Algorithm::FixedBz, r),
        (Alg::Nst, Some(r), None) => (Algorithm::Nst, r),
        (Alg::Variable, None, Some(e)) => (Algorithm::VariableBz, e),
        (Alg::Variable, _, _) => return Err(Error::Config("--alg variable takes --pe".into())),
        _ => {
            return Err(Error::Config(
                "--alg fixed and --alg nst take --rate".into(),
            ))
        }
    };
    if a.delta.is_some() && algorithm != Algorithm::Nst {
        return Err(Error::Config("--delta only applies to --alg nst".into()));
    }
    let config = ExperimentConfig {
        algorithm,
        n: a.n,
        p: CrossoverProb::new(a.p)?,
        param,
        delta: a.delta,
        trials: a.trials,
        master_seed: a.seed,
        truth: TruthSource::Uniform,
    };
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Rates {
            p_grid,
            delta_grid,
            out,
        } => {
            let grid = parse_p_grid(&p_grid)?;
            let points = emit_rate_curves(&grid, delta_grid, &out)?;
            eprintln!("wrote {} rows to {}", points.len(), out.display());
        }
        Command::SortSim(args) => {
            let config = sort_config(&args)?;
            let result = run_experiment(&config)?;
            write_sort_sim(&config, &result, &args.out)?;
            eprintln!(
                "{} errors in {} trials, mean queries {:.2}, {} ms",
                result.errors, result.trials, result.mean_queries, result.wall_time_ms
            );
        }
        Command::Verify { scope } => {
            let scope = match scope {
                ScopeArg::Fast => Scope::Fast,
                ScopeArg::Full => Scope::Full,
            };
            let report = verify_suite(scope)?;
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(EXIT_VERIFY_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
