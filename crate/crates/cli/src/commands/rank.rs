use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use spcl_core::curriculum::{class_centers, difficulties, order_by_difficulty};
use spcl_core::encoder::ToyEncoder;
use spcl_core::trainer::encode_all;

use super::{output_dir, write_file};
use crate::checkpoint::Checkpoint;
use crate::dataset::load_examples;
use crate::CommonArgs;

pub const QUINTILES: usize = 5;

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Encoder to rank with; a freshly seeded encoder when omitted.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset to rank; defaults to the training set.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    pub index: usize,
    pub label: usize,
    pub dif: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quintile {
    pub quintile: usize,
    pub size: usize,
    pub mean_dif: f64,
    pub min_dif: f64,
    pub max_dif: f64,
    /// `(label, count)` in ascending label order.
    pub labels: Vec<(usize, usize)>,
}

/// Samples sorted easiest first, plus consecutive near-equal fifths.
pub fn rank_dataset(
    encoder: &ToyEncoder,
    data: &[spcl_core::VectorExample],
) -> Result<(Vec<RankedSample>, Vec<Quintile>)> {
    let reps = encode_all(encoder, data)?;
    let labels: Vec<usize> = data.iter().map(|e| e.label).collect();
    let centers = class_centers(&reps, &labels)?;
    let dif = difficulties(&reps, &labels, &centers)?;
    let ranked: Vec<RankedSample> = order_by_difficulty(&dif)
        .into_iter()
        .enumerate()
        .map(|(rank, index)| RankedSample {
            index,
            label: labels[index],
            dif: dif[index],
            rank,
        })
        .collect();

    let n = ranked.len();
    let quintiles = (0..QUINTILES)
        .filter_map(|q| {
            let part = &ranked[q * n / QUINTILES..(q + 1) * n / QUINTILES];
            if part.is_empty() {
                return None;
            }
            let mut hist = std::collections::BTreeMap::new();
            for s in part {
                *hist.entry(s.label).or_insert(0) += 1;
            }
            Some(Quintile {
                quintile: q,
                size: part.len(),
                mean_dif: part.iter().map(|s| s.dif).sum::<f64>() / part.len() as f64,
                min_dif: part.first().map_or(0.0, |s| s.dif),
                max_dif: part.last().map_or(0.0, |s| s.dif),
                labels: hist.into_iter().collect(),
            })
        })
        .collect();
    Ok((ranked, quintiles))
}

pub fn run(args: &RankArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let path = args
        .data
        .as_ref()
        .or(cfg.train_path.as_ref())
        .context("nothing to rank: pass --data or --train")?;
    let data = load_examples(&cfg, path, false).with_context(|| format!("loading {}", path.display()))?;
    let first = data.first().context("dataset is empty")?;
    let encoder = match &args.checkpoint {
        Some(p) => Checkpoint::load(p)?.model.encoder,
        None => ToyEncoder::new(
            first.features.len(),
            cfg.train.hidden_dim,
            cfg.train.output_dim,
            &mut spcl_core::seeded_rng(cfg.train.seed),
        )?,
    };
    let (ranked, quintiles) = rank_dataset(&encoder, &data).context("ranking")?;

    let mut csv = String::from("index,label,dif,rank\n");
    for s in &ranked {
        csv.push_str(&format!("{},{},{},{}\n", s.index, s.label, s.dif, s.rank));
    }
    let mut qcsv = String::from("quintile,size,mean_dif,min_dif,max_dif\n");
    for q in &quintiles {
        qcsv.push_str(&format!("{},{},{},{},{}\n", q.quintile, q.size, q.mean_dif, q.min_dif, q.max_dif));
    }
    let out = output_dir(cfg.out.as_ref())?;
    write_file(out, "ranking.csv", csv)?;
    write_file(out, "quintiles.csv", qcsv)?;

    let overall = ranked.iter().map(|s| s.dif).sum::<f64>() / ranked.len() as f64;
    println!("{} samples, mean difficulty {overall:.4}", ranked.len());
    for q in &quintiles {
        let labels: Vec<String> = q.labels.iter().map(|(l, c)| format!("{l}:{c}")).collect();
        let tag = match q.quintile {
            0 => " (easiest)",
            x if x + 1 == quintiles.len() => " (hardest)",
            _ => "",
        };
        println!(
            "quintile {}{tag}: n={} mean {:.4} range [{:.4}, {:.4}] labels {}",
            q.quintile,
            q.size,
            q.mean_dif,
            q.min_dif,
            q.max_dif,
            labels.join(" ")
        );
    }
    Ok(())
}
