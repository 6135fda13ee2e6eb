//! `f3`: rewrite verified news into paired real/fake variants, purify the
//! output against its sources, and benchmark zero-shot detection prompts.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use f3_core::evaluate::EmitFormat;
use f3_core::prompt::{Catalog, Strategy, VariantId};
use f3_gateway::{GatewayStats, ProviderConfig};
use f3_pipeline::ThresholdChoice;

use config::{
    parse_emit_tokens, parse_strategy_tokens, parse_variant_tokens, LoadedConfig, RunConfig,
    RunMode, ThresholdMode,
};
use stages::{
    build_gateway, build_scorer, run_clean, run_detect, run_evaluate, run_generate, run_ingest,
    run_purify_stage, run_split, write_manifest, RunContext, StageOutput,
};

#[derive(Parser)]
#[command(
    name = "f3",
    version,
    about = "Paired real/fake news generation, purification, and zero-shot detection benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Run-configuration JSON file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Write artifacts here instead of the configured out_dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Serve every model call from the cache; any miss is an error.
    #[arg(long)]
    replay: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read the source corpus into the canonical sample format.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Drop boilerplate-contaminated and over-long samples.
    Clean {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Assign stratified train/validation/test and ood_full splits.
    Split {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rewrite verified real sources into paired real/fake variants.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Source corpus file; defaults to this run's cleaned corpus.
        #[arg(long, value_name = "FILE")]
        sources: Option<PathBuf>,
        /// Use one configured provider instead of roles.generators.
        #[arg(long, value_name = "ID")]
        provider: Option<String>,
        /// `all` or a comma-separated list like `paraphrase/minor`.
        #[arg(long, default_value = "all", value_name = "LIST")]
        variants: String,
    },
    /// Filter generated samples by entailment vote and factual alignment.
    Purify {
        #[command(flatten)]
        common: CommonArgs,
        /// Generated-samples file; defaults to this run's generate output.
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        /// Judge provider ids instead of roles.judges.
        #[arg(long, value_delimiter = ',', value_name = "IDS")]
        judges: Vec<String>,
        /// `paper` or `compute`.
        #[arg(long, value_name = "MODE")]
        thresholds: Option<String>,
    },
    /// Run the detection prompt matrix over the benchmark splits.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Samples file to benchmark whole, ignoring splits.
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        /// `all` or a comma-separated strategy list.
        #[arg(long, default_value = "all", value_name = "LIST")]
        strategies: String,
        /// Detector provider ids instead of roles.detectors.
        #[arg(long, value_delimiter = ',', value_name = "IDS")]
        providers: Vec<String>,
    },
    /// Score detections and write the stratified reports.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Detection results file; defaults to this run's detect output.
        #[arg(long, value_name = "FILE")]
        results: Option<PathBuf>,
        /// Split assignments file; defaults to this run's split output.
        #[arg(long, value_name = "FILE")]
        splits: Option<PathBuf>,
        /// Comma-separated formats: csv, markdown, plotdata.
        #[arg(long, value_name = "LIST")]
        emit: Option<String>,
    },
    /// Run every stage in order on one configuration.
    All {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Ingest { common }
            | Command::Clean { common }
            | Command::Split { common }
            | Command::Generate { common, .. }
            | Command::Purify { common, .. }
            | Command::Detect { common, .. }
            | Command::Evaluate { common, .. }
            | Command::All { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Clean { .. } => "clean",
            Command::Split { .. } => "split",
            Command::Generate { .. } => "generate",
            Command::Purify { .. } => "purify",
            Command::Detect { .. } => "detect",
            Command::Evaluate { .. } => "evaluate",
            Command::All { .. } => "all",
        }
    }
}

/// A failure classified for the exit code: 1 for bad invocations and
/// configs, 2 for a stage that could not produce its artifacts.
enum CliError {
    Usage(anyhow::Error),
    Stage(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version surface as "errors" with a zero exit code.
            let ok = err.exit_code() == 0;
            let _ = err.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(CliError::Stage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// The per-command inputs resolved before any stage runs, so that every
/// flag or config problem exits as a usage error.
struct Plan {
    generators: Vec<ProviderConfig>,
    judges: Vec<ProviderConfig>,
    detectors: Vec<ProviderConfig>,
    variants: Vec<VariantId>,
    strategies: Vec<Strategy>,
    formats: Vec<EmitFormat>,
    choice: ThresholdChoice,
}

fn resolve_role(
    config: &RunConfig,
    flag_ids: &[String],
    role_ids: &[String],
    role: &str,
) -> Result<Vec<ProviderConfig>> {
    let ids = if flag_ids.is_empty() { role_ids } else { flag_ids };
    if ids.is_empty() {
        bail!("no {role} configured: set roles.{role} in the config or pass the flag");
    }
    ids.iter()
        .map(|id| {
            config
                .provider(id)
                .cloned()
                .ok_or_else(|| anyhow!("unknown provider {id:?}"))
        })
        .collect()
}

fn plan(command: &Command, config: &RunConfig) -> Result<Plan> {
    let mut plan = Plan {
        generators: Vec::new(),
        judges: Vec::new(),
        detectors: Vec::new(),
        variants: Vec::new(),
        strategies: Vec::new(),
        formats: Vec::new(),
        choice: config.thresholds.to_choice(),
    };
    let need_align = |what: &str| -> Result<()> {
        if config.align.is_none() {
            bail!("config has no align backend, required to {what}");
        }
        Ok(())
    };
    match command {
        Command::Ingest { .. } | Command::Clean { .. } | Command::Split { .. } => {}
        Command::Generate { provider, variants, .. } => {
            let flag: Vec<String> = provider.clone().into_iter().collect();
            plan.generators = resolve_role(config, &flag, &config.roles.generators, "generators")?;
            plan.variants = parse_variant_tokens(variants)?;
        }
        Command::Purify { judges, thresholds, .. } => {
            plan.judges = resolve_role(config, judges, &config.roles.judges, "judges")?;
            need_align("purify")?;
            if let Some(token) = thresholds {
                plan.choice = ThresholdMode::from_token(token)
                    .ok_or_else(|| anyhow!("unknown threshold mode {token:?} (paper, compute)"))?
                    .to_choice();
            }
        }
        Command::Detect { strategies, providers, .. } => {
            plan.detectors = resolve_role(config, providers, &config.roles.detectors, "detectors")?;
            plan.strategies = if strategies.trim().eq_ignore_ascii_case("all") {
                config.strategy_list()?
            } else {
                let tokens: Vec<String> = strategies.split(',').map(|s| s.trim().to_string()).collect();
                parse_strategy_tokens(&tokens)?
            };
        }
        Command::Evaluate { emit, .. } => {
            plan.formats = match emit {
                Some(list) => {
                    let tokens: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
                    parse_emit_tokens(&tokens)?
                }
                None => config.emit_list()?,
            };
        }
        Command::All { .. } => {
            plan.generators = resolve_role(config, &[], &config.roles.generators, "generators")?;
            plan.judges = resolve_role(config, &[], &config.roles.judges, "judges")?;
            plan.detectors = resolve_role(config, &[], &config.roles.detectors, "detectors")?;
            need_align("purify")?;
            plan.variants = parse_variant_tokens("all")?;
            plan.strategies = config.strategy_list()?;
            plan.formats = config.emit_list()?;
        }
    }
    Ok(plan)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let common = command.common();
    let loaded = LoadedConfig::load(&common.config).map_err(CliError::Usage)?;
    let plan = plan(&command, &loaded.config).map_err(CliError::Usage)?;

    let mode = if common.replay { RunMode::Replay } else { loaded.config.mode };
    let out = common.out.clone().unwrap_or_else(|| loaded.out_dir());
    let cache = match &loaded.config.cache_dir {
        Some(dir) => loaded.resolve(dir),
        None => out.join("cache"),
    };

    execute(&command, &loaded, plan, mode, out, cache).map_err(CliError::Stage)
}

fn execute(
    command: &Command,
    loaded: &LoadedConfig,
    plan: Plan,
    mode: RunMode,
    out: PathBuf,
    cache: PathBuf,
) -> Result<()> {
    std::fs::create_dir_all(&out)
        .map_err(|err| anyhow!("creating output directory {}: {err}", out.display()))?;
    let catalog = match loaded.catalog_dir() {
        Some(dir) => Catalog::load(&dir)?,
        None => Catalog::builtin()?,
    };
    let ctx = RunContext { loaded, mode, out, cache, catalog };

    let mut outputs: Vec<StageOutput> = Vec::new();
    let mut stats = GatewayStats::default();
    match command {
        Command::Ingest { .. } => outputs.push(run_ingest(&ctx)?),
        Command::Clean { .. } => outputs.push(run_clean(&ctx)?),
        Command::Split { .. } => outputs.push(run_split(&ctx)?),
        Command::Generate { sources, .. } => {
            let mut gateway = build_gateway(&ctx)?;
            outputs.push(run_generate(
                &ctx,
                &mut gateway,
                sources.as_deref(),
                &plan.generators,
                &plan.variants,
            )?);
            stats = gateway.stats().clone();
        }
        Command::Purify { input, .. } => {
            let mut gateway = build_gateway(&ctx)?;
            let scorer = build_scorer(&ctx)?;
            outputs.push(run_purify_stage(
                &ctx,
                &mut gateway,
                scorer.as_ref(),
                input.as_deref(),
                &plan.judges,
                plan.choice,
            )?);
            stats = gateway.stats().clone();
        }
        Command::Detect { input, .. } => {
            let mut gateway = build_gateway(&ctx)?;
            outputs.push(run_detect(
                &ctx,
                &mut gateway,
                input.as_deref(),
                &plan.detectors,
                &plan.strategies,
            )?);
            stats = gateway.stats().clone();
        }
        Command::Evaluate { results, splits, .. } => {
            outputs.push(run_evaluate(&ctx, results.as_deref(), splits.as_deref(), &plan.formats)?);
        }
        Command::All { .. } => {
            let mut gateway = build_gateway(&ctx)?;
            let scorer = build_scorer(&ctx)?;
            outputs.push(run_ingest(&ctx)?);
            outputs.push(run_clean(&ctx)?);
            outputs.push(run_generate(&ctx, &mut gateway, None, &plan.generators, &plan.variants)?);
            outputs.push(run_purify_stage(
                &ctx,
                &mut gateway,
                scorer.as_ref(),
                None,
                &plan.judges,
                plan.choice,
            )?);
            outputs.push(run_split(&ctx)?);
            outputs.push(run_detect(&ctx, &mut gateway, None, &plan.detectors, &plan.strategies)?);
            outputs.push(run_evaluate(&ctx, None, None, &plan.formats)?);
            stats = gateway.stats().clone();
        }
    }

    write_manifest(&ctx, command.name(), &outputs, stats)
}
