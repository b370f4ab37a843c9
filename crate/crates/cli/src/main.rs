mod commands;
mod input;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thermoform::symbolic::DEFAULT_MAX_TERMS;
use thermoform::{Budget, Error};

use commands::{GibbsOptions, PotentialChoice};
use report::{Format, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::ResourceLimit { .. }) => 3,
            CliError::Core(Error::NumericalFailure { .. } | Error::Precondition(_)) => 1,
            CliError::Core(_) | CliError::Io { .. } | CliError::Usage(_) => 2,
        }
    }
}

/// Thermodynamic formalism for matrix cocycles over full shifts.
#[derive(Parser)]
#[command(name = "thermoform", version)]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for catalog entries that take one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest number of words an exhaustive sum may visit.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_TERMS)]
    max_terms: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PotentialArgs {
    /// System file, or catalog entry such as `similarity(N=3, r=1/2, d=2)`.
    input: Option<String>,
    /// Use the singular value potential of factor 1 with this exponent.
    #[arg(long)]
    s: Option<f64>,
    /// Constant per-symbol weights such as `1,1`, instead of a system.
    #[arg(long, conflicts_with_all = ["input", "s"])]
    weights: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Pressure bracket from exhaustive partition sums.
    Pressure {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        connector: usize,
        #[arg(long, default_value_t = 3)]
        window: usize,
    },
    /// Affinity dimension of the first factor.
    Dimension {
        input: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Finite-orbit subspace classes and their combinatorial type.
    Classes {
        input: String,
        #[arg(long, default_value_t = 256)]
        cap: usize,
        /// Target subspace dimensions, one per factor, such as `1,1`.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long, default_value_t = 2)]
        product_len: usize,
    },
    /// First simultaneously proximal word in shortlex order.
    Proximal {
        input: String,
        /// Longest word searched.
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Correlation ratio scan and the psi-mixing precondition.
    Mixing {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 6)]
        max_gap: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        connector: usize,
    },
    /// Block recoding of a system.
    Recode {
        input: String,
        #[arg(long, default_value_t = 2)]
        blocks: usize,
    },
    /// Built-in reference systems.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Finite-depth Gibbs table and derived quantities.
    Gibbs {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Past, gap and future lengths for the epsilon-independence check.
        #[arg(long)]
        split: Option<String>,
        /// Print every cylinder weight and mass.
        #[arg(long)]
        table: bool,
        /// Run the total ergodicity diagnostic.
        #[arg(long)]
        diagnose: bool,
        /// Fit the 2-block recoded table as a mixture of its two class tables.
        #[arg(long)]
        mixture: bool,
        #[arg(long, default_value_t = 256)]
        cap: usize,
        #[arg(long, default_value_t = 1)]
        window: usize,
    },
    /// Replaces each factor by an exterior power.
    Reduce {
        input: String,
        /// Exterior degrees, one per factor; suggested from Lyapunov gaps by default.
        #[arg(long)]
        ell: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    /// Writes the system file of an entry.
    Export { entry: String },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("THERMOFORM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("THERMOFORM_THREADS must be a non-negative integer, got {value:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn choice<'a>(p: &'a PotentialArgs, seed: Option<u64>) -> PotentialChoice<'a> {
    PotentialChoice {
        input: p.input.as_deref(),
        s: p.s,
        weights: p.weights.as_deref(),
        seed,
    }
}

fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let budget = Budget::new(cli.max_terms);
    let seed = cli.seed;
    match &cli.command {
        Command::Pressure {
            potential,
            depth,
            connector,
            window,
        } => commands::run_pressure(&choice(potential, seed), *depth, *connector, *window, budget),
        Command::Dimension { input, depth, tol } => commands::run_dimension(input, seed, *depth, *tol, budget),
        Command::Classes {
            input,
            cap,
            dims,
            product_len,
        } => commands::run_classes(input, seed, *cap, dims.as_deref(), *product_len),
        Command::Proximal { input, depth } => commands::run_proximal(input, seed, *depth, budget),
        Command::Mixing {
            potential,
            max_gap,
            window,
            connector,
        } => commands::run_mixing(&choice(potential, seed), *max_gap, *window, *connector, budget),
        Command::Recode { input, blocks } => commands::run_recode(input, seed, *blocks),
        Command::Catalog { action } => match action {
            CatalogAction::List => Ok(commands::run_catalog_list()),
            CatalogAction::Export { entry } => commands::run_catalog_export(entry, seed),
        },
        Command::Gibbs {
            potential,
            depth,
            split,
            table,
            diagnose,
            mixture,
            cap,
            window,
        } => {
            let o = GibbsOptions {
                depth: *depth,
                split: split.as_deref(),
                table: *table,
                diagnose: *diagnose,
                mixture: *mixture,
                cap: *cap,
                window: *window,
            };
            commands::run_gibbs(&choice(potential, seed), &o, budget)
        }
        Command::Reduce { input, ell, depth } => commands::run_reduce(input, seed, ell.as_deref(), *depth, budget),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = configure_threads().and_then(|()| run(&cli));
    match result {
        Ok(mut report) => {
            report.wall_time = start.elapsed();
            let out = match cli.format {
                Format::Text => report.render_text(),
                Format::Records => report.render_records(),
            };
            if cli.format == Format::Records || report.has_document() {
                eprintln!("wall_time_s\t{:.6}", report.wall_time.as_secs_f64());
            }
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
