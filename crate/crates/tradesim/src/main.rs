use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tradesim::commands::{cmd_delta, cmd_fetch, cmd_report, cmd_run, default_agent, RunOptions};
use tradesim::config::{RunConfig, RunMode};
use tradesim::fetch::Fetcher;
use tradesim::http::{Http, UreqHttp};

#[derive(Parser)]
#[command(name = "tradesim", version, about = "Replayable portfolio environment for model agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch prices, markets and news into the snapshot store.
    Fetch {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run one session per configured model and write JSONL logs.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Continue existing logs.
        #[arg(long)]
        resume: bool,
        /// Only run these model ids.
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Metrics table for session logs.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Write metrics.txt, metrics.json and series.csv here.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Rolling-k deltas for session logs.
    Delta {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(short, long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        k: Vec<usize>,
        /// Leave lags that do not fit a log empty instead of failing.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        json: bool,
    },
}

fn fetch(cfg: &RunConfig, http: Arc<dyn Http>) -> anyhow::Result<bool> {
    let fetcher = Fetcher::new(Box::new(http), cfg.fetch.clone());
    let summary = cmd_fetch(cfg, &fetcher, chrono::Utc::now())?;
    println!(
        "fetched {} new point(s), {} file(s) changed",
        summary.points_added, summary.files_changed
    );
    for (what, err) in &summary.failures {
        eprintln!("failed: {what}: {err}");
    }
    for c in &summary.conflicts {
        eprintln!("conflict: {c}");
    }
    Ok(summary.is_complete())
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Fetch { config } => {
            let cfg = RunConfig::load(&config)?;
            let http: Arc<dyn Http> = Arc::new(UreqHttp::from_policy(&cfg.fetch));
            Ok(if fetch(&cfg, http)? { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Run { config, resume, models } => {
            let mut cfg = RunConfig::load(&config)?;
            if !models.is_empty() {
                cfg.models.retain(|m| models.contains(&m.id));
                if cfg.models.is_empty() {
                    anyhow::bail!("none of the requested models are configured");
                }
            }
            let http: Arc<dyn Http> = Arc::new(UreqHttp::from_policy(&cfg.fetch));
            let mut ok = true;
            if cfg.mode == RunMode::Live {
                ok &= fetch(&cfg, http.clone())?;
            }
            let summaries = cmd_run(&cfg, RunOptions { resume }, |entry| default_agent(entry, http.clone()))?;
            for s in &summaries {
                match &s.result {
                    Ok(r) => println!(
                        "{}: {} step(s), final value {:.4}, CR {:.4}%  ({})",
                        s.model,
                        r.steps,
                        r.final_value,
                        r.cumulative_return * 100.0,
                        s.log.display()
                    ),
                    Err(e) => {
                        ok = false;
                        eprintln!("{}: failed: {e:#}", s.model);
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { logs, out, json } => {
            let (report, _) = cmd_report(&logs, out.as_deref())?;
            print!("{}", if json { report.to_json() } else { report.to_table() });
            Ok(ExitCode::SUCCESS)
        }
        Command::Delta { logs, k, lenient, json } => {
            let table = cmd_delta(&logs, &k, lenient)?;
            print!("{}", if json { table.to_json() } else { table.to_table() });
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
