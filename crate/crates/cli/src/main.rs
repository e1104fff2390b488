mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use brtkrige::ErrorCategory;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "brtkrige",
    version,
    about = "Boosted regression trees with robust residual kriging for soil carbon stocks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, short = 'o', env = "BRTKRIGE_OUTPUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, short = 'c')]
    pub config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the measurement-error allowance epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute layer stocks from horizon records.
    Stock {
        /// Horizon CSV: site_id,top_cm,bottom_cm,bulk_density,soc_pct,rock_frag.
        #[arg(long)]
        horizons: PathBuf,
        /// Layer depth in cm.
        #[arg(long, default_value_t = 30.0)]
        depth: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model on the full dataset and write it with importance and
    /// partial-dependence tables.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Model name from the config.
        #[arg(long, short = 'm')]
        model: String,
    },
    /// Monte Carlo cross-validation of every configured model.
    Cv {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Run a full fold rotation in each repetition.
        #[arg(long)]
        rotation: bool,
    },
    /// Predict at new sites with a fitted model.
    Predict {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short = 'm')]
        model: String,
        /// Site CSV to predict at (targets may be blank).
        #[arg(long)]
        sites: PathBuf,
        /// Model file; defaults to `<out>/<model>.brtk`.
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Simulate a synthetic dataset with known structure.
    Simulate {
        /// Simulation spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Residual variography and Winsorizing diagnostics on the full dataset.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Restrict to one model; default is every model.
        #[arg(long, short = 'm')]
        model: Option<String>,
    },
}

fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Config => 3,
        ErrorCategory::Data => 4,
        ErrorCategory::Numeric => 5,
        ErrorCategory::Validity => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stock {
            horizons,
            depth,
            common,
        } => commands::stock(&horizons, depth, &common),
        Command::Fit { cfg, model } => commands::fit(&cfg, &model),
        Command::Cv {
            cfg,
            repetitions,
            workers,
            rotation,
        } => commands::cv(&cfg, repetitions, workers, rotation),
        Command::Predict {
            cfg,
            model,
            sites,
            model_file,
        } => commands::predict(&cfg, &model, &sites, model_file.as_deref()),
        Command::Simulate { spec, seed, common } => commands::simulate(&spec, seed, &common),
        Command::Report { cfg, model } => commands::report(&cfg, model.as_deref()),
    };
    match result {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
