//! `editflow`: train, sample, tabulate and verify edit-flow models.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration error, 3 any other runtime error.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(
    name = "editflow",
    version,
    about = "Edit-flow models on small token vocabularies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted (required for `train`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Counted {
    #[command(flatten)]
    common: Common,
    /// Traces, samples per source, or Monte Carlo samples.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a metrics stream.
    Train(Common),
    /// Simulate a checkpoint and write newline-delimited traces.
    Sample(Counted),
    /// Tabulate the generated coupling over all two-letter words.
    CouplingHeatmap(Counted),
    /// Run a brute-force verification suite.
    Verify {
        #[command(flatten)]
        counted: Counted,
        /// kfe, theorem1, lemmas, propagation, corrector or cfg-identities.
        #[arg(long)]
        suite: String,
    },
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let file = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| UsageError(format!("cannot read {}: {e}", p.display())))?;
            config::parse(&text)?
        }
        None => Vec::new(),
    };
    let mut overrides = c
        .set
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got `{kv}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = c.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let cfg = RunConfig::resolve(&file, &overrides)?;
    eprint!(
        "# resolved config (sha256 {})\n{}",
        cfg.sha256(),
        cfg.canonical()
    );
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(c) => {
            let cfg = resolve(&c)?;
            let out = c
                .out
                .ok_or_else(|| UsageError("train needs --out".into()))?;
            commands::train(&cfg, &out)?;
        }
        Command::Sample(c) => {
            let cfg = resolve(&c.common)?;
            commands::sample(&cfg, c.count, c.common.out.as_deref())?;
        }
        Command::CouplingHeatmap(c) => {
            let cfg = resolve(&c.common)?;
            commands::coupling_heatmap(&cfg, c.count, c.common.out.as_deref())?;
        }
        Command::Verify { counted: c, suite } => {
            let cfg = resolve(&c.common)?;
            return commands::verify(&cfg, &suite, c.count, c.common.out.as_deref());
        }
    }
    Ok(true)
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause.is::<UsageError>()
            || matches!(
                cause.downcast_ref::<editflow::Error>(),
                Some(editflow::Error::Config(_))
            )
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 3 })
        }
    }
}
