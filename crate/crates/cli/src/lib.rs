//! The `aot` command line: pipeline runs, ablations, scoring and IR tools.

pub mod commands;
pub mod config;
pub mod ir_cmd;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{parse_assignment, Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("environment error: {0}")]
    Environment(String),
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) | CliError::Invalid(_) => 1,
            CliError::Config(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aot", version, about = "Staged abstraction pipeline for Verilog generation")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, simulate and score one configuration.
    Run(RunArgs),
    /// Run the six stage-set ablations and print a comparison table.
    Ablate(RunArgs),
    /// Re-score traces already written by `run`.
    Score {
        #[command(flatten)]
        args: RunArgs,
        /// Traces file; defaults to <output.dir>/traces.jsonl.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Intermediate-representation tools.
    #[command(subcommand)]
    Ir(IrCommand),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replay a scripted mock backend instead of calling a provider.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// AoT stage set, e.g. `base+ir+pseudo`.
    #[arg(long)]
    pub stages: Option<String>,
    #[arg(long)]
    pub abstraction_model: Option<String>,
    #[arg(long)]
    pub translation_model: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub runs: Option<u32>,
    /// pass@k values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep simulator scratch directories of failing samples.
    #[arg(long)]
    pub debug_keep_scratch: bool,
    /// Any config key, e.g. `--set sampling.temperature=0.2`. Also
    /// accepted as `--sampling.temperature 0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum IrCommand {
    /// Check an IR file and list every violation.
    Validate {
        file: PathBuf,
        /// fsm, truth_table, boolean_expression, kmap or mux_mapping; inferred when absent.
        #[arg(long)]
        kind: Option<String>,
        /// Treat incomplete truth tables as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Emit Verilog for an IR under a module header.
    Lower {
        file: PathBuf,
        header: PathBuf,
        #[arg(long)]
        kind: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Minimize a K-map into Boolean equations.
    Minimize {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn absolute(p: &PathBuf) -> String {
    std::path::absolute(p).unwrap_or_else(|_| p.clone()).to_string_lossy().into_owned()
}

impl RunArgs {
    /// Flags as dotted-key overrides, applied in command-line order after `--set`.
    pub fn overrides(&self) -> Result<Vec<(String, Value)>, ConfigError> {
        let mut o: Vec<(String, Value)> = self.set.iter().map(|s| parse_assignment(s)).collect::<Result<_, _>>()?;
        let mut put = |k: &str, v: Value| o.push((k.to_string(), v));
        if let Some(m) = &self.mock {
            put("models.backend", json!({"kind": "mock", "script": absolute(m)}));
        }
        if let Some(s) = &self.strategy {
            put("strategy.name", json!(s));
        }
        if let Some(s) = &self.stages {
            put("strategy.stages", json!(s));
        }
        if let Some(m) = &self.abstraction_model {
            put("strategy.abstraction_model", json!(m));
        }
        if let Some(m) = &self.translation_model {
            put("strategy.translation_model", json!(m));
        }
        if let Some(n) = self.n {
            put("sampling.n", json!(n));
        }
        if let Some(r) = self.runs {
            put("sampling.runs", json!(r));
        }
        if !self.k.is_empty() {
            put("output.ks", json!(self.k));
        }
        if let Some(d) = &self.out {
            put("output.dir", json!(absolute(d)));
        }
        if self.debug_keep_scratch {
            put("simulator.keep_scratch", json!(true));
        }
        Ok(o)
    }

    pub fn load(&self) -> Result<Config, ConfigError> {
        Config::load(&self.config, &self.overrides()?)
    }
}

/// Rewrites `--a.b value` and `--a.b=value` into `--set a.b=value`.
pub fn expand_dotted(args: Vec<OsString>) -> Vec<OsString> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter().peekable();
    while let Some(a) = it.next() {
        let dotted = a.to_str().and_then(|s| s.strip_prefix("--")).filter(|s| {
            let key = s.split('=').next().unwrap_or_default();
            key.contains('.') && !key.starts_with('.')
        });
        match dotted.map(str::to_string) {
            Some(s) if s.contains('=') => {
                out.push("--set".into());
                out.push(s.into());
            }
            Some(s) => {
                let value = it.next_if(|v| !v.to_string_lossy().starts_with("--")).map_or("true".to_string(), |v| v.to_string_lossy().into_owned());
                out.push("--set".into());
                out.push(format!("{s}={value}").into());
            }
            None => out.push(a),
        }
    }
    out
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => commands::cmd_run(a.load()?).map(|_| ()),
        Command::Ablate(a) => commands::cmd_ablate(a.load()?).map(|_| ()),
        Command::Score { args, traces } => commands::cmd_score(args.load()?, traces).map(|_| ()),
        Command::Ir(IrCommand::Validate { file, kind, strict }) => ir_cmd::validate(&file, kind.as_deref(), strict),
        Command::Ir(IrCommand::Lower { file, header, kind, out }) => ir_cmd::lower(&file, &header, kind.as_deref(), out.as_ref()),
        Command::Ir(IrCommand::Minimize { file, out }) => ir_cmd::minimize(&file, out.as_ref()),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(expand_dotted(args)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
