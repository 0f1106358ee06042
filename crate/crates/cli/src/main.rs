use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use shrimp_cli::timing::write_timing_csv;
use shrimp_cli::{emit_plots, ingest_csv, run_experiment, time_comparison, ExperimentConfig, TimingConfig};

#[derive(Parser)]
#[command(name = "shrimp", version, about = "Sparse random feature experiments")]
struct Cli {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace the seed list with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to SHRIMP_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set m=200` or `--set q=[1,2]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid.
    Run,
    /// Time the pruning loop against basis pursuit.
    Time,
    /// Render SVG plots from a results directory.
    Plot,
    /// Load a CSV file and report what would be fitted.
    IngestCheck {
        path: PathBuf,
        #[arg(long, default_value = "y")]
        target: String,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        no_standardize: bool,
    },
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("run needs --config")?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seeds=[{seed}]"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("out={}", serde_json::to_string(out)?));
    }
    ExperimentConfig::load(path)?.with_overrides(&overrides)
}

fn timing_config(cli: &Cli) -> Result<TimingConfig> {
    let mut doc = match &cli.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => serde_json::to_value(TimingConfig::default())?,
    };
    let obj = doc.as_object_mut().context("timing config must be a JSON object")?;
    for item in &cli.overrides {
        let (key, raw) = item.split_once('=').with_context(|| format!("override '{item}' is not key=value"))?;
        if !obj.contains_key(key) {
            bail!("unknown timing key '{key}'");
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
        obj.insert(key.into(), value);
    }
    if let Some(seed) = cli.seed {
        obj.insert("seed".into(), seed.into());
    }
    Ok(serde_json::from_value(doc)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run => {
            let cfg = experiment_config(&cli)?;
            let threads = shrimp_cli::run::resolve_threads(cli.threads);
            let table = run_experiment(&cfg, threads)?;
            let failed = table.rows.iter().filter(|r| r.n_winner.is_none()).count();
            println!(
                "{} rows written to {} ({failed} failed)",
                table.rows.len(),
                cfg.out.join("results.csv").display()
            );
        }
        Command::Time => {
            let cfg = timing_config(&cli)?;
            let rows = time_comparison(&cfg)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            std::fs::create_dir_all(&out)?;
            write_timing_csv(&rows, &out.join("timing.csv"))?;
            for r in &rows {
                println!("{:>6} m={:<6} N={:<6} median {:.1} ms", r.method, r.m, r.n_features, r.median_ms);
            }
        }
        Command::Plot => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let files = emit_plots(&dir)?;
            println!("{} plots written to {}", files.len(), dir.join("plots").display());
        }
        Command::IngestCheck { path, target, test, no_standardize } => {
            let ds = ingest_csv(path, target, !no_standardize, cli.seed.unwrap_or(0), test.as_deref())?;
            println!("d={} train={} val={} test={}", ds.d(), ds.x_train.nrows(), ds.x_val.nrows(), ds.x_test.nrows());
        }
    }
    Ok(())
}
