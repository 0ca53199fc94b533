use anyhow::{Context, Result};
use clap::Args;
use spcl_core::trainer::{train, MetricsReport, TrainedModel};

use super::{output_dir, write_file};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::load_splits;
use crate::CommonArgs;

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Loads the data and trains; nothing is written.
pub fn train_run(cfg: &RunConfig) -> Result<(TrainedModel, MetricsReport)> {
    let splits = load_splits(cfg)?;
    let (model, report) = train(&cfg.train, &splits.train, &splits.dev, splits.test.as_deref()).context("training")?;
    Ok((model, report))
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    // everything that can fail happens before the output directory is touched
    let (model, report) = train_run(&cfg)?;
    let jsonl = report.to_jsonl()?;
    let out = output_dir(cfg.out.as_ref())?;
    Checkpoint {
        model,
        labels: cfg.labels.clone(),
    }
    .save(&out.join("checkpoint.txt"))?;
    write_file(out, "metrics.csv", report.to_csv())?;
    write_file(out, "metrics.jsonl", jsonl)?;
    write_file(out, "run.cfg", cfg.render())?;

    let test = report.test_f1.map(|t| format!(", test weighted-F1 {t:.4}")).unwrap_or_default();
    println!(
        "{} loss, curriculum {}: kept epoch {} with dev weighted-F1 {:.4}{test}",
        cfg.train.loss,
        if cfg.train.curriculum { "on" } else { "off" },
        report.best_epoch,
        report.best_dev_f1,
    );
    println!("wrote {}", out.display());
    Ok(())
}
