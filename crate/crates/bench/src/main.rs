use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::TimeDelta;
use clap::{Parser, Subcommand};
use flowcast_bench::config::ExperimentConfig;
use flowcast_bench::report::{emit_report, write_timings};
use flowcast_bench::sweep::{evaluate_model, horizon_sweep};
use flowcast_bench::synth::{generate, SynthConfig};
use flowcast_bench::train::train_model;
use flowcast_bench::{prepare, TrainedModel};
use flowcast_core::{aggregate, impute_same_period_last_week, parse_flow_csv, DatasetProfile};
use flowcast_gbrt::{tune_random_search, FeatureMatrix, SearchSpace};

#[derive(Parser)]
#[command(name = "flowcast", version, about = "Train and benchmark traffic flow forecasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw flow CSV: impute gaps and aggregate to a coarser interval.
    Ingest {
        raw: PathBuf,
        #[arg(long, default_value = "melbourne")]
        profile: DatasetProfile,
        /// Target interval in minutes.
        #[arg(long, default_value_t = 60)]
        interval: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic hourly series and its holiday file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        holidays_out: PathBuf,
        #[arg(long, default_value_t = 3 * 365)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model and save its checkpoint.
    Train {
        config: PathBuf,
        /// Defaults to the first horizon in the config.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score a saved checkpoint on the test split.
    Evaluate {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Train and score one model per horizon, then write the reports.
    Sweep {
        config: PathBuf,
        /// Comma-separated; defaults to the config's horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// File name stem; defaults to the model kind.
        #[arg(long)]
        stem: Option<String>,
    },
    /// Random search over the boosting hyperparameters on the training split.
    Tune {
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        /// Where to write the best `[xgboost]` table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pick_horizon(cfg: &ExperimentConfig, h: Option<usize>) -> Result<usize> {
    match h.or_else(|| cfg.horizons.first().copied()) {
        Some(h) => Ok(h),
        None => bail!("no horizon given and the config lists none"),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest { raw, profile, interval, out } => {
            let series = parse_flow_csv(&raw, profile)?;
            let missing = series.missing_count();
            let series = aggregate(&impute_same_period_last_week(&series)?, TimeDelta::minutes(interval))?;
            series.write_csv(&out)?;
            println!("{} readings ({missing} imputed before aggregation) -> {} rows in {}", raw.display(), series.len(), out.display());
        }
        Command::Synth { out, holidays_out, days, seed } => {
            let (series, calendar) = generate(&SynthConfig { days, seed, ..SynthConfig::default() })?;
            series.write_csv(&out)?;
            std::fs::write(&holidays_out, calendar.to_file_string())
                .with_context(|| format!("writing {}", holidays_out.display()))?;
            println!("{} rows, {} holidays", series.len(), calendar.len());
        }
        Command::Train { config, horizon, checkpoint } => {
            let cfg = load(&config)?;
            let h = pick_horizon(&cfg, horizon)?;
            let prep = prepare(&cfg)?;
            let outcome = train_model(&cfg, &prep, h)?;
            outcome.model.save(&checkpoint)?;
            for e in &outcome.log.epochs {
                println!("epoch {:>3}  lr {:.3e}  train {:.6}  val {:.6}", e.epoch, e.lr, e.train_loss, e.val_loss);
            }
            println!("saved {} checkpoint for T_p={h} to {}", cfg.model, checkpoint.display());
        }
        Command::Evaluate { config, checkpoint, horizon } => {
            let cfg = load(&config)?;
            let h = pick_horizon(&cfg, horizon)?;
            let prep = prepare(&cfg)?;
            let model = TrainedModel::load(&cfg, prep.scaler, &checkpoint)?;
            let eval = evaluate_model(&cfg, &prep, &model, h)?;
            println!("{}", serde_json::to_string_pretty(&eval.overall)?);
            if let Some(sub) = eval.subset {
                println!("subset: {}", serde_json::to_string_pretty(&sub)?);
            }
        }
        Command::Sweep { config, horizons, out_dir, stem } => {
            let cfg = load(&config)?;
            let hs = horizons.unwrap_or_else(|| cfg.horizons.clone());
            let outcome = horizon_sweep(&cfg, &hs)?;
            std::fs::create_dir_all(&out_dir)?;
            let stem = stem.unwrap_or_else(|| cfg.model.name().to_string());
            let paths = emit_report(&outcome.report, &out_dir, &stem)?;
            write_timings(&outcome.timings, &out_dir.join(format!("{stem}.timings.json")))?;
            for row in outcome.report.csv_rows() {
                println!("{} T={} T_p={}: MAE {:.3} RMSE {:.3} GEH {:.4}", row.model, row.input_len, row.horizon, row.mae, row.rmse, row.geh_mean);
            }
            println!("wrote {} and {}", paths.csv.display(), paths.jsonl.display());
        }
        Command::Tune { config, rounds, folds, out } => {
            let cfg = load(&config)?;
            let prep = prepare(&cfg)?;
            let x = FeatureMatrix::from_time_features(&prep.train.times, &cfg.feature_mask()?)?;
            let report = tune_random_search(&x, &prep.train.raw, &SearchSpace::default(), &cfg.xgboost, rounds, folds, cfg.seed)?;
            let best = report.trials.iter().map(|t| t.score).fold(f64::INFINITY, f64::min);
            let text = toml::to_string(&report.best)?;
            println!("best mean validation MSE {best:.4}\n[xgboost]\n{text}");
            if let Some(path) = out {
                std::fs::write(&path, format!("[xgboost]\n{text}")).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
