//! Command-line front end: dataset generation, training, difficulty
//! ranking, batch-size sweeps and sweep reports.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "spcl", version, about = "Prototype-augmented contrastive training with a curriculum")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (train/dev/test files).
    GenData(commands::gen_data::GenDataArgs),
    /// Train one model; writes a checkpoint and per-epoch metrics.
    Train(commands::train::TrainArgs),
    /// Rank a dataset by difficulty under a checkpoint or a fresh encoder.
    Rank(commands::rank::RankArgs),
    /// Train a loss × batch-size × seed grid.
    Sweep(commands::sweep::SweepArgs),
    /// Summarize sweep cells: mean ± stddev per cell and the drop direction.
    Report(commands::report::ReportArgs),
}

/// Flags shared by the commands that train or encode.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// ce, supcon or spcl.
    #[arg(long)]
    pub loss: Option<String>,
    /// on or off.
    #[arg(long)]
    pub curriculum: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file (if any) with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let here = std::path::Path::new("");
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        let overrides = [
            ("loss", self.loss.clone()),
            ("curriculum", self.curriculum.clone()),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v, here).map_err(|e| e.context(format!("--{}", key.replace('_', "-"))))?;
            }
        }
        for (slot, value) in [
            (&mut cfg.train_path, &self.train),
            (&mut cfg.dev_path, &self.dev),
            (&mut cfg.test_path, &self.test),
            (&mut cfg.out, &self.out),
        ] {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => commands::gen_data::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Rank(args) => commands::rank::run(&args),
        Command::Sweep(args) => commands::sweep::run(&args),
        Command::Report(args) => commands::report::run(&args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "loss = supcon\nbatch_size = 4\ntrain = t.jsonl\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            batch_size: Some(32),
            curriculum: Some("off".into()),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.train.loss, spcl_core::LossKind::SupCon);
        assert_eq!(cfg.train.batch_size, 32);
        assert!(!cfg.train.curriculum);
        assert_eq!(cfg.train_path.unwrap(), dir.path().join("t.jsonl"));

        let bad = CommonArgs {
            loss: Some("hinge".into()),
            ..Default::default()
        };
        assert!(format!("{:#}", bad.resolve().unwrap_err()).contains("--loss"));
    }
}
