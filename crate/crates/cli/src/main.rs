//! `futuresim`: validate content, run headless batches, host live sessions and
//! inspect logs.
//!
//! Exit codes: 0 success, 1 invalid input or failure, 2 unreadable or
//! unparseable file.

mod host;
mod replay;
mod simulate;
mod table;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use futuresim_core::content::CONTENT_DIR_ENV;
use futuresim_server::{BIND_ADDR_ENV, DATA_DIR_ENV, DEFAULT_BIND_ADDR};

#[derive(Parser)]
#[command(name = "futuresim", version, about = "AI futures role-play: engine, agents and server")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a scenario file and list every violation.
    Validate {
        path: PathBuf,
    },
    /// Play many games with scripted agents and aggregate the outcomes.
    Simulate(SimulateArgs),
    /// Serve live sessions over HTTP and WebSocket until interrupted.
    Host(HostArgs),
    /// Rebuild a game from its log and summarize it.
    Replay(ReplayArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario id from the content directory, or a path to a scenario file.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    /// `role=policy` pairs, repeated or comma-separated. `*=policy` covers
    /// every role not named.
    #[arg(long, value_delimiter = ',', required = true)]
    pub policies: Vec<String>,
    /// Number of games.
    #[arg(long)]
    pub n: u64,
    /// Game i is played with seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `results.json` and `results.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = CONTENT_DIR_ENV)]
    pub content_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct HostArgs {
    #[arg(long, env = BIND_ADDR_ENV, default_value = DEFAULT_BIND_ADDR)]
    pub bind: String,
    #[arg(long, env = CONTENT_DIR_ENV)]
    pub content_dir: Option<PathBuf>,
    /// Where sessions are journaled and restored from.
    #[arg(long, env = DATA_DIR_ENV, default_value = "futuresim-data")]
    pub data_dir: PathBuf,
}

#[derive(Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
    /// Summarize the world after this turn (1-based) instead of at the end.
    #[arg(long)]
    pub to_turn: Option<i64>,
    /// Print the debrief: scores and every private project.
    #[arg(long)]
    pub debrief: bool,
}

/// A command's failure: what to print and which code to exit with.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub detail: serde_json::Value,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the invalid-input code.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let json = cli.json;
    let result = match cli.command {
        Cmd::Validate { path } => validate::run(&path, json),
        Cmd::Simulate(args) => simulate::run(&args, json),
        Cmd::Host(args) => host::run(&args, json),
        Cmd::Replay(args) => replay::run(&args, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if json {
                let mut v = serde_json::json!({ "ok": false, "error": f.message });
                if !f.detail.is_null() {
                    v["detail"] = f.detail;
                }
                println!("{v}");
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
