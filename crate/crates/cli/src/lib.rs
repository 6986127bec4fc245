//! Batch front end: scores summaries, runs the lexical, agreement, ranking
//! and correlation analyses, plans annotation campaigns and serves them.

pub mod commands;
pub mod config;
pub mod inputs;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;
use inputs::{Annotations, MetricTable};

#[derive(Debug, Parser)]
#[command(
    name = "mslr-eval",
    version,
    about = "Evaluation toolkit for literature-review summarization"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "mslr-eval.toml")]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Compute instance-level metrics into one CSV per metric.
    Score,
    /// Self-repetition, n-gram coverage and train-overlap series.
    Selfrep,
    /// Synthesis and input-match rates.
    Copying,
    /// Inter-annotator agreement on dual-annotated facets.
    Agreement,
    /// System rankings from metrics, facets and pairwise judgments.
    Rank,
    /// Metric, facet and ranking correlations and ECDF series.
    Correlate,
    /// Bootstrap stability of the combined pairwise ranking.
    Bootstrap,
    /// Sample a facet (and optionally pairwise) annotation plan.
    Plan,
    /// Serve the campaign plan over HTTP.
    Serve {
        /// Overrides [serve] addr.
        #[arg(long)]
        addr: Option<String>,
    },
    /// Run every analysis whose inputs are present.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::Selfrep => "selfrep",
            Command::Copying => "copying",
            Command::Agreement => "agreement",
            Command::Rank => "rank",
            Command::Correlate => "correlate",
            Command::Bootstrap => "bootstrap",
            Command::Plan => "plan",
            Command::Serve { .. } => "serve",
            Command::Report => "report",
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(cfg: &RunConfig, command: &Command) -> Result<()> {
    use commands::*;
    match command {
        Command::Score => score::run(cfg).map(|_| ()),
        Command::Selfrep => lexical::selfrep(cfg),
        Command::Copying => lexical::copying(cfg).map(|_| ()),
        Command::Agreement => human::agreement(cfg, &Annotations::load(cfg)?),
        Command::Rank => {
            let corpus = inputs::corpus(cfg)?;
            human::rank(cfg, &MetricTable::load(cfg, &corpus)?, &Annotations::load(cfg)?).map(|_| ())
        }
        Command::Correlate => {
            let corpus = inputs::corpus(cfg)?;
            let metrics = MetricTable::load(cfg, &corpus)?;
            let ann = Annotations::load(cfg)?;
            let rankings = human::rankings(&metrics, &ann)?;
            human::correlate_cmd(cfg, &metrics, &ann, &rankings)
        }
        Command::Bootstrap => human::bootstrap(cfg, &Annotations::load(cfg)?).map(|_| ()),
        Command::Plan => campaign::plan(cfg).map(|_| ()),
        Command::Serve { addr } => campaign::serve(cfg, addr.as_deref()),
        Command::Report => report(cfg),
    }
}
