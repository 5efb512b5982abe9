use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use editprop::eval::AbsentClass;
use editprop::session::{Engine, SessionStore};
use serde::Serialize;
use tracing_subscriber::EnvFilter;

use editprop_cli::commands::{self, CommitSource, EvalOptions, EvalTask};
use editprop_cli::project::engine_config;

#[derive(Parser)]
#[command(name = "editprop", version, about = "Edit propagation: where to edit next, and how")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter commits and write location and generation samples as JSONL.
    Mine {
        /// Git repository to read history from.
        #[arg(long, conflicts_with = "commits", required_unless_present = "commits")]
        repo: Option<PathBuf>,
        /// Revision whose history is mined.
        #[arg(long, default_value = "HEAD")]
        rev: String,
        /// Directory of per-commit JSON files instead of a repository.
        #[arg(long)]
        commits: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated: all, file_loc, line_loc, gen.
        #[arg(long, default_value = "all")]
        task: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Negative files per file-location sample.
        #[arg(long)]
        negatives: Option<usize>,
        /// Miner configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate the engine on a mined dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// file_loc, line_loc, gen, ablation or all.
        #[arg(long, default_value = "gen")]
        task: EvalTask,
        /// Comma-separated candidate counts.
        #[arg(long, default_value = "1,3,5,10")]
        k: String,
        /// selective, random, all or none.
        #[arg(long, default_value = "selective")]
        priors: String,
        /// Seed of the random prior selection.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// train, valid, test or all.
        #[arg(long, default_value = "all")]
        split: String,
        /// How a label absent from both prediction and truth enters macro
        /// averages: perfect or skip.
        #[arg(long, default_value = "perfect")]
        absent: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a task,metric,k,value table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Engine configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Persist session logs here; sessions found there are restored.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay a session log and print the location report after each edit.
    Replay {
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Apply a diff to a project and recommend the next edits.
    Recommend {
        /// Project directory, before the diff.
        #[arg(long)]
        project: PathBuf,
        /// Unified diff of the edits made so far.
        #[arg(long)]
        diff: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mine {
            repo,
            rev,
            commits,
            out,
            task,
            seed,
            negatives,
            config,
        } => {
            let source = match (repo, commits) {
                (Some(repo), None) => CommitSource::Git { repo, rev },
                (None, Some(dir)) => CommitSource::Dir(dir),
                _ => bail!("give exactly one of --repo and --commits"),
            };
            let mut cfg = commands::miner_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = negatives {
                cfg.negatives = n;
            }
            let summary = commands::mine(&source, &out, &commands::parse_tasks(&task)?, &cfg)?;
            print_json(&summary)
        }
        Command::Eval {
            dataset,
            task,
            k,
            priors,
            seed,
            split,
            absent,
            out,
            csv,
            config,
        } => {
            let opts = EvalOptions {
                task,
                ks: commands::parse_ks(&k)?,
                policy: commands::parse_policy(&priors, seed)?,
                seed,
                split: commands::parse_split(&split)?,
                absent: match absent.as_str() {
                    "perfect" => AbsentClass::Perfect,
                    "skip" => AbsentClass::Skip,
                    _ => bail!("unknown absent-class convention {absent:?} (expected perfect or skip)"),
                },
            };
            let report = commands::eval(&dataset, engine_config(config.as_deref())?, &opts)?;
            if let Some(p) = csv {
                write_file(&p, &report.to_csv())?;
            }
            match out {
                Some(p) => write_file(&p, &serde_json::to_string_pretty(&report)?),
                None => print_json(&report),
            }
        }
        Command::Serve { addr, data, config } => {
            let engine = Engine::lexical(engine_config(config.as_deref())?);
            let store = match data {
                Some(dir) => SessionStore::open(engine, dir)?,
                None => SessionStore::in_memory(engine),
            };
            serve(addr, Arc::new(store))
        }
        Command::Replay { log, config } => {
            for report in commands::replay(&log, engine_config(config.as_deref())?)? {
                println!("{}", serde_json::to_string(&report)?);
            }
            Ok(())
        }
        Command::Recommend {
            project,
            diff,
            prompt,
            k,
            config,
        } => {
            if k == 0 {
                bail!("--k must be positive");
            }
            print_json(&commands::recommend(&project, &diff, &prompt, k, engine_config(config.as_deref())?)?)
        }
    }
}

fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(addr = %listener.local_addr()?, "serving");
        axum::serve(listener, editprop_cli::api::router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
