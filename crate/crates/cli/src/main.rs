use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eventrank::config::PipelineConfig;
use eventrank::kg::LanguageCode;
use eventrank::eval::save_ablation;
use eventrank::features::load_feature_rows;
use eventrank::pipeline::{ablation_from_rows, recommend, Artifacts, Pipeline, Stage};
use eventrank::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "eventrank", version, about = "Language-specific event recommendation")]
struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Re-run stages even when their outputs are up to date.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
struct RecommendArgs {
    #[command(flatten)]
    common: Common,
    /// Query entity id.
    #[arg(long)]
    query: String,
    /// Language code, e.g. `de`.
    #[arg(long)]
    lang: String,
    /// Number of events to return.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    /// Ablate this feature matrix instead of the pipeline's own.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and index the graph; write a summary.
    Ingest(Common),
    /// Random walks and skip-gram embeddings per language.
    Embed(Common),
    /// Click-based relevance labels.
    Relevance(Common),
    /// Per-language ground truth with sampled negatives.
    Groundtruth(Common),
    /// Feature matrix for every ground-truth pair.
    Features(Common),
    /// Train one ranking model per language.
    Train(Common),
    /// Cross-validated metrics, baselines and candidate recall.
    Evaluate(Common),
    /// Leave-one-feature-group-out comparison.
    Ablate(AblateArgs),
    /// Absolute feature correlation matrix.
    Correlate(Common),
    /// Rank events for a query entity.
    Recommend(RecommendArgs),
    /// Every stage from ingest to evaluate.
    Pipeline(Common),
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if let Some(w) = c.workers {
        cfg.set_workers(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stage(c: &Common, stage: Stage) -> Result<()> {
    let cfg = load_config(c)?;
    let mut p = Pipeline::new(cfg, c.force);
    for o in p.run(stage)? {
        println!("{}\t{}", o.stage.name(), if o.ran { "ran" } else { "skipped" });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stage = match &cli.command {
        Command::Ingest(c) => (c, Stage::Ingest),
        Command::Embed(c) => (c, Stage::Embed),
        Command::Relevance(c) => (c, Stage::Relevance),
        Command::Groundtruth(c) => (c, Stage::GroundTruth),
        Command::Features(c) => (c, Stage::Features),
        Command::Train(c) => (c, Stage::Train),
        Command::Evaluate(c) | Command::Pipeline(c) => (c, Stage::Evaluate),
        Command::Ablate(a) => match &a.features {
            None => (&a.common, Stage::Ablate),
            Some(path) => {
                let cfg = load_config(&a.common)?;
                let rows = ablation_from_rows(&load_feature_rows(path)?, &cfg)?;
                let out = Artifacts::new(&cfg.output).ablation();
                std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
                save_ablation(&rows, &out)?;
                for r in &rows {
                    println!("{}\t{:.6}", r.label(), r.ndcg);
                }
                return Ok(());
            }
        },
        Command::Correlate(c) => (c, Stage::Correlate),
        Command::Recommend(r) => {
            let cfg = load_config(&r.common)?;
            let lang = LanguageCode::new(&r.lang)?;
            let list = recommend(&cfg, &r.query, &lang, r.top)?;
            match r.format {
                Format::Tsv => print!("{}", list.to_tsv()),
                Format::Json => println!("{}", list.to_json()?),
            }
            return Ok(());
        }
    };
    run_stage(stage.0, stage.1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ErrorClass::Usage.exit_code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
