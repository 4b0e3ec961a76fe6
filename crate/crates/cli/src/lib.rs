//! Command-line front end: `scan`, `calibrate`, `relabel` and `savings`.

pub mod commands;
pub mod config;
pub mod error;
pub mod html;
pub mod output;

use clap::{Parser, Subcommand};
use commands::Context;
use config::{ProviderChoice, RunConfig};
use error::{CliError, CliResult};
use output::{parse_list, Format};
use std::ffi::OsString;
use std::path::PathBuf;
use stepdedup_core::calibration::Scorer;
use stepdedup_core::detect::Strategy;
use stepdedup_core::savings::Attribution;

#[derive(Debug, Parser)]
#[command(
    name = "stepdedup",
    version,
    about = "Find duplicate steps in Gherkin suites"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for bootstrap resampling and fold assignment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `fallback` or `external:<command>`.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "stepdedup-out")]
    pub out: PathBuf,
    /// Output formats to write; all of them by default.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of repositories and cluster their steps.
    Scan {
        root: PathBuf,
        /// Comma-separated strategies: exact, near_exact, semantic, hybrid.
        #[arg(long)]
        strategies: Option<String>,
        /// Run embedding strategies past the all-pairs size limit.
        #[arg(long)]
        allow_large: bool,
    },
    /// Evaluate scorers against a labelled pairs file.
    Calibrate {
        pairs: PathBuf,
        /// Comma-separated scorers; strategies plus token_jaccard and tfidf.
        #[arg(long)]
        scorers: Option<String>,
        /// Multi-rater labels for Fleiss' kappa, one JSON object per line.
        #[arg(long)]
        overlap: Option<PathBuf>,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Relabel a pairs file with the score-free rules.
    Relabel {
        pairs: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Estimate consolidation savings from scan artifacts.
    Savings {
        /// Directory holding steps.csv and the exact and hybrid cluster
        /// files; defaults to the output directory.
        artifacts: Option<PathBuf>,
        #[arg(long, value_parser = parse_attribution)]
        attribution: Option<Attribution>,
    },
}

fn parse_attribution(s: &str) -> Result<Attribution, String> {
    match s.replace('-', "_").as_str() {
        "repo_local" => Ok(Attribution::RepoLocal),
        "proportional" => Ok(Attribution::Proportional),
        _ => Err(format!(
            "unknown attribution `{s}`; expected repo_local or proportional"
        )),
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Effective configuration: file, then flags, then the environment.
pub fn resolve_config(cli: &Cli, env_endpoint: Option<String>) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(p) = &cli.provider {
        config.provider.choice = p.parse::<ProviderChoice>()?;
    }
    match &cli.command {
        Command::Scan {
            strategies,
            allow_large,
            ..
        } => {
            if let Some(s) = strategies {
                config.strategies = parse_list::<Strategy>(s).map_err(usage)?;
            }
            config.detection.allow_large |= allow_large;
        }
        Command::Calibrate {
            scorers,
            resamples,
            synonyms,
            ..
        } => {
            if let Some(s) = scorers {
                config.calibrate.scorers = parse_list::<Scorer>(s).map_err(usage)?;
            }
            if let Some(r) = resamples {
                config.calibrate.resamples = *r;
            }
            if synonyms.is_some() {
                config.relabel.synonyms.clone_from(synonyms);
            }
        }
        Command::Relabel { synonyms, .. } => {
            if synonyms.is_some() {
                config.relabel.synonyms.clone_from(synonyms);
            }
        }
        Command::Savings { attribution, .. } => {
            if let Some(a) = attribution {
                config.savings.attribution = *a;
            }
        }
    }
    config.finish(env_endpoint)
}

pub fn execute(cli: Cli, env_endpoint: Option<String>) -> CliResult<String> {
    let config = resolve_config(&cli, env_endpoint)?;
    let ctx = Context::new(config, cli.out.clone(), &cli.format)?;
    match &cli.command {
        Command::Scan { root, .. } => {
            let doc = commands::scan(root, &ctx)?;
            let s = &doc.data;
            let mut msg = format!(
                "scanned {} steps in {} files across {} repositories ({} parse errors)",
                s.total_steps,
                s.files,
                s.repos,
                s.parse_errors.len()
            );
            for st in &s.strategies {
                msg.push_str(&format!(
                    "\n  {}: {} clusters, duplication rate {:.2}%",
                    st.strategy.as_str(),
                    st.clusters,
                    100.0 * st.duplication_rate
                ));
            }
            Ok(msg)
        }
        Command::Calibrate { pairs, overlap, .. } => {
            let doc = commands::calibrate_cmd(pairs, overlap.as_deref(), &ctx)?;
            let mut msg = format!("calibrated {} pairs", doc.data.report.pair_count);
            for s in &doc.data.report.scorers {
                msg.push_str(&format!(
                    "\n  {}: threshold {:.2}, F1 {:.3}",
                    s.scorer, s.primary.threshold, s.primary.f1
                ));
            }
            Ok(msg)
        }
        Command::Relabel { pairs, .. } => {
            let doc = commands::relabel(pairs, &ctx)?;
            let s = &doc.data.summary;
            Ok(format!(
                "relabelled {} pairs: {} duplicate, {} not duplicate",
                s.pairs, s.positives, s.negatives
            ))
        }
        Command::Savings { artifacts, .. } => {
            let dir = artifacts.clone().unwrap_or_else(|| cli.out.clone());
            let doc = commands::savings(&dir, &ctx)?;
            let r = &doc.data.report;
            Ok(format!(
                "eliminable occurrences: {:.0} exact, {:.0} combined (range {:.0} to {:.0})",
                r.aggregate_exact,
                r.aggregate_combined,
                r.sensitivity.first().map_or(0.0, |p| p.aggregate),
                r.sensitivity.last().map_or(0.0, |p| p.aggregate),
            ))
        }
    }
}

/// Parse arguments, run, report, and return the process exit code.
pub fn run<I, T>(args: I, env_endpoint: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, env_endpoint) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("stepdedup: {e}");
            e.exit_code()
        }
    }
}
