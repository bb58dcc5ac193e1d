use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rescue_core::cli;

#[derive(Parser)]
#[command(name = "rescue", version, about = "Fire-engine rescue traffic simulator and multi-agent trainer")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train QMIX or IQL and write rewards, checkpoint and final-episode trace
    Train {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        train_config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Greedy evaluation of a checkpoint
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the summary as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP environment protocol
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a JSONL trace as CSV
    Replay {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> rescue_core::Result<()> {
    match cmd {
        Command::Train {
            scenario,
            train_config,
            out,
            seed,
            episodes,
        } => {
            let r = cli::cmd_train(&scenario, &train_config, out.as_deref(), seed, episodes)?;
            println!(
                "{} episodes, final-100 mean return {:.3}",
                r.log.rows.len(),
                r.log.final_mean(100)
            );
            println!("rewards: {}", r.rewards.display());
            println!("checkpoint: {}", r.checkpoint.display());
            println!("trace: {}", r.trace.display());
        }
        Command::Eval {
            scenario,
            checkpoint,
            episodes,
            seed,
            out,
        } => {
            let summary = cli::cmd_eval(&scenario, &checkpoint, episodes, seed)?;
            print!("{}", summary.to_text());
            if let Some(out) = out {
                std::fs::write(out, serde_json::to_string_pretty(&summary)?)?;
            }
        }
        Command::Serve { scenario, port, seed } => cli::cmd_serve(&scenario, port, seed)?,
        Command::Replay { trace, out } => {
            let csv = cli::cmd_replay(&trace)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = run(Args::parse().command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
