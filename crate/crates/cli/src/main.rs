use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use invrl::agents::AgentKind;
use invrl::data::{
    default_start, generate_orders, ingest_csv, synthetic_metadata, write_metadata, GeneratorConfig,
    IngestOptions, DEFAULT_DAYS,
};
use invrl::harness::{
    emit_heatmaps, emit_reward_components, read_metrics, run_evaluation, run_training, write_heatmaps,
    Checkpoint, EpisodeMetrics, RunConfig, CONFIG_FILE,
};

#[derive(Parser)]
#[command(
    name = "invrl",
    version,
    about = "Multi-product inventory control with shared-weight RL agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic order log and product metadata.
    GenerateData(GenerateArgs),
    /// Validate an external order log and write it in canonical form.
    Ingest(IngestArgs),
    /// Train an agent and write a run directory.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint on the test split.
    Evaluate(EvalArgs),
    /// Critic and policy grids over inventory level and forecast.
    Heatmap(HeatmapArgs),
    /// Per-episode reward components of a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long)]
    products: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    /// Mean orders per day of every product.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    metadata_seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    orders: PathBuf,
    /// Product metadata CSV; synthetic metadata is drawn when absent.
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DAYS)]
    days: usize,
    #[arg(long, default_value_t = default_start())]
    start: NaiveDate,
    /// Seed of the date assignment for customer-level logs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    metadata_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    seed: u64,
    /// Run configuration file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the bundled small instance instead of the full-size defaults.
    #[arg(long, conflicts_with = "config")]
    desk: bool,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    orders: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    initial_level: Option<f64>,
    #[arg(long)]
    resample_orders: bool,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    tightness: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Also evaluate the final checkpoint on the test split.
    #[arg(long)]
    evaluate: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    /// Checkpoint directory; defaults to the latest in the run.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    resolution: usize,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenerateData(a) => generate(a),
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => {
            let m = run_evaluation(&a.run, a.checkpoint.as_deref())?;
            print_metrics("test", &m);
            Ok(())
        }
        Command::Heatmap(a) => heatmap(a),
        Command::Report(a) => report(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = GeneratorConfig {
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    if let Some(p) = a.products {
        cfg.products = p;
    }
    if let Some(d) = a.days {
        cfg.days = d;
    }
    if let Some(r) = a.rate {
        cfg.base_rates = vec![r];
    }
    let log = generate_orders(&cfg)?;
    let meta = synthetic_metadata(&log.products, a.metadata_seed);
    std::fs::create_dir_all(&a.out)?;
    let orders = a.out.join("orders.csv");
    log.write_csv(BufWriter::new(File::create(&orders)?))?;
    write_metadata(&a.out.join("metadata.csv"), &meta)?;
    println!(
        "{} orders for {} products over {} periods -> {}",
        log.total_orders(),
        log.products.len(),
        log.periods(),
        a.out.display()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let opts = IngestOptions {
        start: a.start,
        days: a.days,
        seed: a.seed,
        products: None,
    };
    let ingested = ingest_csv(&a.orders, &opts)?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    let log = ingested.log;
    if log.products.is_empty() {
        bail!("{} holds no orders", a.orders.display());
    }
    let meta = match &a.metadata {
        Some(p) => invrl::data::read_metadata(p)?,
        None => synthetic_metadata(&log.products, a.metadata_seed),
    };
    // Fails early on products without metadata.
    invrl::data::assign_metadata(&log.products, &meta)?;
    std::fs::create_dir_all(&a.out)?;
    log.write_csv(BufWriter::new(File::create(a.out.join("orders.csv"))?))?;
    write_metadata(&a.out.join("metadata.csv"), &meta)?;
    println!(
        "{} orders for {} products over {} periods -> {}",
        log.total_orders(),
        log.products.len(),
        log.periods(),
        a.out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let agent = a.agent.context("--agent is required without --config")?;
            if a.desk {
                RunConfig::desk(agent, a.seed)
            } else {
                RunConfig::new(agent, a.seed)
            }
        }
    };
    cfg.seed = a.seed;
    if let Some(k) = a.agent {
        cfg.agent = k;
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { $field = v; })*
        };
    }
    set!(
        episodes => cfg.episodes,
        output_dir => cfg.output_dir,
        initial_level => cfg.initial_level,
        checkpoint_every => cfg.checkpoint_every,
        tightness => cfg.capacity.tightness,
        alpha => cfg.capacity.alpha,
        window => cfg.forecast.window,
        gamma => cfg.hyperparams.gamma,
        q => cfg.hyperparams.q,
        actions => cfg.hyperparams.actions,
        learning_rate => cfg.hyperparams.sgd.learning_rate,
        momentum => cfg.hyperparams.sgd.momentum,
        batch_size => cfg.hyperparams.sgd.batch_size,
    );
    if a.orders.is_some() {
        cfg.data.orders = a.orders.clone();
    }
    if a.metadata.is_some() {
        cfg.data.metadata = a.metadata.clone();
    }
    cfg.resample_orders |= a.resample_orders;
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a)?;
    let summary = run_training(&cfg)?;
    if let Some(last) = summary.metrics.last() {
        print_metrics("last training episode", last);
    }
    println!("run directory {}", summary.run_dir.display());
    if summary.violations > 0 {
        bail!("{} periods executed an infeasible action", summary.violations);
    }
    if a.evaluate {
        let m = run_evaluation(&summary.run_dir, Some(&summary.final_checkpoint))?;
        print_metrics("test", &m);
    }
    Ok(())
}

fn checkpoint_dir(run: &Path, explicit: Option<PathBuf>) -> Result<PathBuf> {
    if !run.join(CONFIG_FILE).exists() {
        bail!("{} is not a run directory", run.display());
    }
    Ok(match explicit {
        Some(p) => p,
        None => invrl::harness::latest_checkpoint(run)?,
    })
}

fn heatmap(a: HeatmapArgs) -> Result<()> {
    let path = checkpoint_dir(&a.run, a.checkpoint)?;
    let ck = Checkpoint::load(&path)?;
    let grid = emit_heatmaps(&ck, a.resolution)?;
    let out = a.out.unwrap_or_else(|| a.run.clone());
    for f in write_heatmaps(&grid, &out)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let path = emit_reward_components(&a.run)?;
    let metrics = read_metrics(&a.run)?;
    let tail = &metrics[metrics.len().saturating_sub(20)..];
    if !tail.is_empty() {
        let mean = tail.iter().map(|m| m.business).sum::<f64>() / tail.len() as f64;
        println!(
            "mean business reward over the last {} episodes: {mean:.4}",
            tail.len()
        );
    }
    println!("{}", path.display());
    Ok(())
}

fn print_metrics(label: &str, m: &EpisodeMetrics) {
    println!(
        "{label}: business {:.4} internal {:.4} rho {:.3} stockout {:.3} wastage {:.4} spread {:.3} level {:.3}",
        m.business, m.internal, m.mean_rho, m.stockout, m.wastage, m.spread, m.mean_level
    );
}
