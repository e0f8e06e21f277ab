use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;
use vignette_core::llm::MockScript;
use vignette_core::planner::PlannerMode;
use vignette_core::runtime::{RuntimeConfig, ViewerTrace};
use vignette_sim::run::{load_spec, run_trace, write_outputs, RunError};
use vignette_sim::stats::{self, RankingDataset};

#[derive(Parser)]
#[command(name = "sim", about = "Replay viewer traces and compute ranking statistics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a trace against a spec under a planner mode.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "cd")]
        mode: PlannerMode,
        #[arg(long)]
        mock: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Runtime config as JSON; missing fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Statistics over a rankings CSV (header of condition labels, one evaluator per row).
    Stats {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long, value_enum)]
        test: Test,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Test {
    Friedman,
    Nemenyi,
    Means,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::from_default_env()).with_writer(std::io::stderr).init();
    match Cli::parse().cmd {
        Cmd::Run { spec, trace, mode, mock, out, config } => match run(spec, trace, mode, mock, out, config) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Cmd::Stats { rankings, test } => match RankingDataset::load(&rankings) {
            Ok(data) => {
                let text = match test {
                    Test::Friedman => stats::format_friedman::<f64>(&data),
                    Test::Nemenyi => stats::format_nemenyi::<f64>(&data),
                    Test::Means => stats::format_means::<f64>(&data),
                };
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", rankings.display());
                ExitCode::from(2)
            }
        },
    }
}

fn run(spec: PathBuf, trace: PathBuf, mode: PlannerMode, mock: PathBuf, out: PathBuf, config: Option<PathBuf>) -> Result<ExitCode, RunError> {
    let s = load_spec(&spec)?;
    let t = ViewerTrace::load(&trace)?;
    let script = MockScript::load(&mock)?;
    let config = match config {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|source| RunError::Io { path: p.display().to_string(), source })?;
            serde_json::from_str::<RuntimeConfig>(&text).map_err(|e| RunError::Config { path: p.display().to_string(), message: e.to_string() })?
        }
        None => RuntimeConfig::default(),
    };
    let output = run_trace(s, &t, mode, script, config).map_err(|source| RunError::Runtime { path: spec.display().to_string(), source })?;
    for path in write_outputs(&output, &out)? {
        println!("wrote {}", path.display());
    }
    let sum = &output.summary;
    println!("status {:?}, {} ticks, events {:?} of {}, {} fallbacks", sum.status, sum.ticks, sum.completed_events, sum.key_events, sum.fallbacks);
    if sum.is_safe_completion() {
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &sum.violations {
            eprintln!("violation: {v}");
        }
        if sum.status != vignette_core::runtime::Status::Ended {
            eprintln!("run did not reach the end within {} ticks", sum.ticks);
        }
        Ok(ExitCode::from(1))
    }
}
