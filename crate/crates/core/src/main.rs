use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stabflow::cluster::ClustererSpec;
use stabflow::config::load_config;
use stabflow::report::{self, RunOptions};
use stabflow::Result;

/// Stability-driven clustering of tabular catalogs.
///
/// Exit codes: 0 success, 2 usage, 3 configuration, 4 data,
/// 5 numeric, 6 file system.
#[derive(Debug, Parser)]
#[command(name = "stabflow", version)]
struct Cli {
    /// JSON run configuration, or the manifest.json of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Omit timestamps from plots and timings from the manifest.
    #[arg(long, global = true)]
    reproducible: bool,

    /// Use this model instead of the most stable one, e.g. `kmeans:8`.
    #[arg(long = "override", value_name = "METHOD:K", global = true)]
    selection: Option<ClustererSpec>,

    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Generalizability with test = train and a memorizing classifier.
    #[arg(long, global = true)]
    self_check: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quality-filter the catalog and split train/test.
    Prepare,
    /// Embeddings, neighborhood retention and scatter plots.
    Explore,
    /// Stability search and model selection.
    Search,
    /// Consensus, local stability, generalizability, sweeps, composition.
    Validate,
    /// Text and JSON summary of a run directory.
    Report,
    /// Every stage in order.
    Run,
}

fn execute(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .ok_or_else(|| stabflow::Error::Config("--config <path> is required".into()))?;
    let mut cfg = load_config(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if cli.selection.is_some() {
        cfg.selection = cli.selection;
    }
    if cli.self_check {
        cfg.self_check = true;
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| stabflow::Error::Config(format!("thread pool: {e}")))?;
    }
    let opts = RunOptions {
        reproducible: cli.reproducible,
    };
    match cli.command {
        Command::Prepare => {
            let s = report::cmd_prepare(&cfg, opts)?;
            println!(
                "{} rows after quality filters; train {} / test {}",
                s.filtered_rows, s.train_rows, s.test_rows
            );
        }
        Command::Explore => {
            let s = report::cmd_explore(&cfg, opts)?;
            println!("{} embeddings of {} rows", s.embeddings.len(), s.rows);
        }
        Command::Search => {
            let s = report::cmd_search(&cfg, opts)?;
            let how = if s.overridden { "override" } else { "most stable" };
            println!("selected {} ({how}, mean stability {:.4})", s.spec, s.mean);
        }
        Command::Validate => {
            let s = report::cmd_validate(&cfg, opts)?;
            println!(
                "{}:{} generalizability mean ARI {:.4}",
                s.method, s.k, s.generalizability_mean_ari
            );
        }
        Command::Report | Command::Run => {
            let s = if matches!(cli.command, Command::Run) {
                report::cmd_run(&cfg, opts)?
            } else {
                report::cmd_report(&cfg, opts)?
            };
            println!("selected {}; summary in {}", s.selection.spec, cfg.out.join("report").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
