//! Command-line front end for polyview: ingest, index, query, eval and
//! explain-plan over a directory of `.ccd.json` documents.

pub mod commands;
pub mod config;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use polyview_core::acoa::LevelProfile;
use polyview_core::eval::JudgeKind;

pub use commands::run;
pub use config::PipelineConfig;

/// A command failure, split by who has to fix it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Bad arguments, paths, configuration or input files.
    User(String),
    /// I/O, network, provider or index corruption.
    Env(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::User(_) => 1,
            Failure::Env(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(m) | Failure::Env(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeArg {
    Lexical,
    Llm,
}

impl From<JudgeArg> for JudgeKind {
    fn from(j: JudgeArg) -> Self {
        match j {
            JudgeArg::Lexical => JudgeKind::Lexical,
            JudgeArg::Llm => JudgeKind::Llm,
        }
    }
}

fn parse_profile(s: &str) -> Result<LevelProfile, String> {
    s.parse().map_err(|e: polyview_core::acoa::AcoaError| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "polyview", version, about = "Multi-space retrieval and adaptive question answering over structured documents")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Capability profile: l1, l2, l3 or l4.
    #[arg(long, global = true, value_parser = parse_profile)]
    pub profile: Option<LevelProfile>,
    /// Use the offline mock chat model and embedder.
    #[arg(long, global = true)]
    pub mock_llm: bool,
    /// Index directory (written by `index`, read by `query` and `eval`).
    #[arg(long, global = true, value_name = "DIR")]
    pub index_dir: Option<PathBuf>,
    /// JSON Lines evaluation dataset.
    #[arg(long, global = true, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Print the effective configuration and debug logs to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    /// Override any config leaf, e.g. `--set reflection.max_iters=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and chunk a corpus without writing anything.
    Ingest { corpus_dir: Option<PathBuf> },
    /// Build and persist the four indexes for a corpus.
    Index { corpus_dir: Option<PathBuf> },
    /// Answer one question from a persisted index.
    Query { question: String },
    /// Run a dataset under one or more profiles and report accuracy.
    Eval {
        /// Comma-separated profiles; defaults to all four.
        #[arg(long, value_delimiter = ',', value_parser = parse_profile)]
        profiles: Vec<LevelProfile>,
        /// Answer judge.
        #[arg(long, value_enum)]
        judge: Option<JudgeArg>,
        /// Judge score at or above which an answer counts as correct.
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write the JSON report here.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Print the initial plan for a question without executing it.
    ExplainPlan { question: String },
}

/// Parse `args` (including the program name), run, and return the exit
/// code. Diagnostics go to `err` as single lines.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.to_string().replace('\n', " "));
            f.exit_code()
        }
    }
}
