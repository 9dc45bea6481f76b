use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capfore::driver::{self, Env, RunConfig};

/// Predict LLM benchmark performance from experiment records and search
/// for small, informative task subsets.
#[derive(Parser)]
#[command(name = "capfore", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel fits (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter raw experiment records and write the canonical dataset.
    Ingest {
        /// Raw records file (CSV or JSON-lines); overrides config.records.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Print dataset statistics as JSON.
    Stats {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Run the configured split × predictor grid.
    Evaluate {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Run the configured small-bench construction methods.
    Search {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Train the MLP and dump per-task embedding vectors.
    EmbedTasks {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from config.synth.
    Synth,
    /// Render results files into SVG charts.
    Report {
        /// Results CSV files produced by evaluate or search.
        files: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> capfore::Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| capfore::Error::InvalidConfig(e.to_string()))?;
    }
    let env = Env::new(config, cli.seed, cli.out.clone())?;

    match &cli.command {
        Command::Ingest { records } => {
            let (report, path) = driver::cmd_ingest(&env, records.as_deref())?;
            println!(
                "ingested {} records -> {} after filtering; wrote {}",
                report.input,
                report.output,
                path.display()
            );
        }
        Command::Stats { records } => {
            println!("{}", driver::cmd_stats(&env, records.as_deref())?);
        }
        Command::Evaluate { records } => {
            let results = driver::cmd_evaluate(&env, records.as_deref())?;
            println!(
                "evaluated {} fold runs; results in {}",
                results.len(),
                env.out_dir.display()
            );
        }
        Command::Search { records } => {
            let rows = driver::cmd_search(&env, records.as_deref())?;
            for row in &rows {
                println!(
                    "{} b={}: mean R2 {:.4} (std {:.4})",
                    row.method, row.b, row.mean_r2, row.std_r2
                );
            }
        }
        Command::EmbedTasks { records } => {
            let path = driver::cmd_embed_tasks(&env, records.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Synth => {
            let path = driver::cmd_synth(&env)?;
            println!("wrote {}", path.display());
        }
        Command::Report { files } => {
            for path in driver::cmd_report(&env, files)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CF_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(driver::exit_code(&e))
        }
    }
}
