use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, ensure, Result};
use clap::Args;
use spcl_core::data::{generate_cluster_splits, SplitSpec};
use spcl_core::trainer::{train, LossKind};

use super::{output_dir, write_file};
use crate::config::{parse_list, RunConfig};
use crate::dataset::{load_splits, Splits};
use crate::CommonArgs;

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated seeds (default 0,1,2,3,4).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated batch sizes (default 4,8,16,32).
    #[arg(long)]
    pub batch_sizes: Option<String>,
    /// Comma-separated losses (default supcon,spcl).
    #[arg(long)]
    pub losses: Option<String>,
    /// Synthesize the data per seed from a preset instead of loading files.
    #[arg(long)]
    pub preset: Option<String>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub loss: LossKind,
    pub batch_size: usize,
    pub seed: u64,
    pub outcome: std::result::Result<CellScores, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScores {
    pub best_epoch: usize,
    pub dev_f1: f64,
    pub test_f1: Option<f64>,
}

impl CellScores {
    /// The score compared across cells: test when present, else dev.
    pub fn score(&self) -> f64 {
        self.test_f1.unwrap_or(self.dev_f1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub loss: LossKind,
    pub largest_batch: usize,
    pub smallest_batch: usize,
    pub f1_largest: f64,
    pub f1_smallest: f64,
}

impl Drop {
    pub fn drop(&self) -> f64 {
        self.f1_largest - self.f1_smallest
    }
}

pub enum DataSource {
    Files(Splits),
    Preset(SplitSpec),
}

impl DataSource {
    fn splits(&self, seed: u64) -> Result<std::borrow::Cow<'_, Splits>> {
        Ok(match self {
            DataSource::Files(s) => std::borrow::Cow::Borrowed(s),
            DataSource::Preset(spec) => {
                let s = generate_cluster_splits(spec, &mut spcl_core::seeded_rng(seed))?;
                std::borrow::Cow::Owned(Splits {
                    train: s.train,
                    dev: s.dev,
                    test: Some(s.test),
                    labels: Vec::new(),
                })
            }
        })
    }
}

/// Trains every `(loss, batch size, seed)` cell. Cells are independent and
/// run on `jobs` threads; the result order is the grid order regardless.
pub fn run_grid(cfg: &RunConfig, data: &DataSource, jobs: usize) -> Vec<Cell> {
    let mut grid = Vec::new();
    for &loss in &cfg.losses {
        for &batch_size in &cfg.batch_sizes {
            for &seed in &cfg.seeds {
                grid.push((loss, batch_size, seed));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Cell>>> = Mutex::new(vec![None; grid.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, grid.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(loss, batch_size, seed)) = grid.get(i) else {
                    break;
                };
                let outcome = run_cell(cfg, data, loss, batch_size, seed).map_err(|e| format!("{e:#}"));
                results.lock().expect("no worker panics while holding the lock")[i] = Some(Cell {
                    loss,
                    batch_size,
                    seed,
                    outcome,
                });
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect()
}

fn run_cell(cfg: &RunConfig, data: &DataSource, loss: LossKind, batch_size: usize, seed: u64) -> Result<CellScores> {
    let splits = data.splits(seed)?;
    let mut tc = cfg.train.clone();
    tc.loss = loss;
    tc.batch_size = batch_size;
    tc.seed = seed;
    let (_, report) = train(&tc, &splits.train, &splits.dev, splits.test.as_deref())?;
    Ok(CellScores {
        best_epoch: report.best_epoch,
        dev_f1: report.best_dev_f1,
        test_f1: report.test_f1,
    })
}

/// Per loss: seed-mean score at the largest and at the smallest batch size,
/// over successful cells.
pub fn drops(cells: &[Cell]) -> Vec<Drop> {
    let mut losses: Vec<LossKind> = cells.iter().map(|c| c.loss).collect();
    losses.dedup();
    losses
        .into_iter()
        .filter_map(|loss| {
            let ok: Vec<(usize, f64)> = cells
                .iter()
                .filter(|c| c.loss == loss)
                .filter_map(|c| c.outcome.as_ref().ok().map(|s| (c.batch_size, s.score())))
                .collect();
            let largest = ok.iter().map(|(b, _)| *b).max()?;
            let smallest = ok.iter().map(|(b, _)| *b).min()?;
            let mean = |bs: usize| {
                let v: Vec<f64> = ok.iter().filter(|(b, _)| *b == bs).map(|(_, s)| *s).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            Some(Drop {
                loss,
                largest_batch: largest,
                smallest_batch: smallest,
                f1_largest: mean(largest),
                f1_smallest: mean(smallest),
            })
        })
        .collect()
}

pub const CELLS_HEADER: &str = "loss,batch_size,seed,status,best_epoch,dev_f1,test_f1";

pub fn cells_csv(cells: &[Cell]) -> String {
    let mut out = format!("{CELLS_HEADER}\n");
    for c in cells {
        match &c.outcome {
            Ok(s) => out.push_str(&format!(
                "{},{},{},ok,{},{},{}\n",
                c.loss,
                c.batch_size,
                c.seed,
                s.best_epoch,
                s.dev_f1,
                s.test_f1.map(|t| t.to_string()).unwrap_or_default()
            )),
            Err(_) => out.push_str(&format!("{},{},{},failed,,,\n", c.loss, c.batch_size, c.seed)),
        }
    }
    out
}

pub fn drops_csv(drops: &[Drop]) -> String {
    let mut out = String::from("loss,largest_batch,smallest_batch,f1_largest,f1_smallest,drop\n");
    for d in drops {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.loss,
            d.largest_batch,
            d.smallest_batch,
            d.f1_largest,
            d.f1_smallest,
            d.drop()
        ));
    }
    out
}

pub fn resolve(args: &SweepArgs) -> Result<(RunConfig, DataSource)> {
    let mut cfg = args.common.resolve()?;
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_list(s)?;
    }
    if let Some(s) = &args.batch_sizes {
        cfg.batch_sizes = parse_list(s)?;
    }
    if let Some(s) = &args.losses {
        cfg.losses = parse_list(s)?;
    }
    ensure!(
        !cfg.seeds.is_empty() && !cfg.batch_sizes.is_empty() && !cfg.losses.is_empty(),
        "seeds, batch sizes and losses must all be non-empty"
    );
    let data = match args.preset.as_deref() {
        Some("meld-imbalance") => DataSource::Preset(SplitSpec::meld_imbalance()),
        Some(other) => bail!("unknown preset {other:?} (available: meld-imbalance)"),
        None => DataSource::Files(load_splits(&cfg)?),
    };
    Ok((cfg, data))
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let (cfg, data) = resolve(args)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cells = run_grid(&cfg, &data, jobs);
    let drops = drops(&cells);

    let out = output_dir(cfg.out.as_ref())?;
    write_file(out, "cells.csv", cells_csv(&cells))?;
    write_file(out, "drops.csv", drops_csv(&drops))?;

    for d in &drops {
        println!(
            "{}: weighted-F1 {:.4} at batch {} vs {:.4} at batch {} (drop {:.4})",
            d.loss,
            d.f1_largest,
            d.largest_batch,
            d.f1_smallest,
            d.smallest_batch,
            d.drop()
        );
    }
    let failed: Vec<&Cell> = cells.iter().filter(|c| c.outcome.is_err()).collect();
    for c in &failed {
        if let Err(msg) = &c.outcome {
            eprintln!("cell {} batch {} seed {} failed: {msg}", c.loss, c.batch_size, c.seed);
        }
    }
    if !failed.is_empty() {
        bail!("{} of {} cells failed", failed.len(), cells.len());
    }
    Ok(())
}
