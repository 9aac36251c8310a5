use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jsq_lab::config::{ExperimentConfig, Kind};
use jsq_lab::{report, run_all, run_experiment, Result, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "jsq-lab", version, about = "Experiments for the join-the-shortest-of-L queueing model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment kind, or all of them.
    Run {
        /// Experiment kind; overrides the `kind` field of the config file.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: the config's `output_dir`, else `runs/<kind>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Replica worker threads.
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Render a report.json or summary.json as text.
    Report { path: PathBuf },
    /// Check a configuration file and print its resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { kind, config, out, seed, workers } => {
            let mut cfg = match (&config, kind) {
                (Some(path), _) => ExperimentConfig::load(path)?,
                (None, Some(k)) => ExperimentConfig::new(k),
                (None, None) => {
                    return Err(jsq_lab::LabError::Config("give --kind or --config".into()));
                }
            };
            if let Some(k) = kind {
                cfg.kind = k;
            }
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(cfg.kind.name()));
            let workers = workers
                .filter(|&w| w > 0)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| jsq_lab::LabError::Config(format!("cannot start {workers} workers: {e}")))?;
            pool.install(|| {
                if cfg.kind == Kind::All {
                    let summary = run_all(&cfg, &out)?;
                    print!("{}", summary.render());
                    println!("summary: {}", out.join("summary.json").display());
                    Ok(summary.passed)
                } else {
                    let r = run_experiment(&cfg, &out)?;
                    print!("{}", r.render());
                    println!("report: {}", out.join("report.json").display());
                    Ok(r.passed)
                }
            })
        }
        Command::Report { path } => {
            print!("{}", report::render_file(&path)?);
            Ok(true)
        }
        Command::Validate { config } => {
            let resolved = ExperimentConfig::load(&config)?.resolve()?;
            println!("{}", serde_json::to_string_pretty(&resolved)?);
            println!("config hash: {}", resolved.hash());
            Ok(true)
        }
    }
}
