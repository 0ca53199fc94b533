use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory holding sweep cell CSVs (`loss,batch_size,seed,...`).
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub loss: String,
    pub batch_size: usize,
    pub seeds: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    /// `(loss, mean at largest batch − mean at smallest batch)`.
    pub drops: Vec<(String, f64)>,
}

impl Summary {
    /// Loss with the smallest drop, if at least two losses were compared and
    /// the smallest is unique.
    pub fn most_robust(&self) -> Option<&str> {
        if self.drops.len() < 2 {
            return None;
        }
        let min = self.drops.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
        let mut best = self.drops.iter().filter(|(_, d)| *d == min);
        match (best.next(), best.next()) {
            (Some((loss, _)), None) => Some(loss),
            _ => None,
        }
    }
}

/// Scores per `(loss, batch size)` from every cells-shaped CSV in `dir`.
/// Rows with a status other than `ok` are ignored; the score is `test_f1`
/// when present, else `dev_f1`.
pub fn collect(dir: &Path) -> Result<BTreeMap<(String, usize), Vec<f64>>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();

    let mut scores: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for path in files {
        let mut reader = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(loss), Some(batch), Some(_seed)) = (col("loss"), col("batch_size"), col("seed")) else {
            continue;
        };
        let (test, dev, status) = (col("test_f1"), col("dev_f1"), col("status"));
        if test.is_none() && dev.is_none() {
            continue;
        }
        for (i, record) in reader.records().enumerate() {
            let record = record.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
            if status.is_some_and(|s| &record[s] != "ok") {
                continue;
            }
            let field = |c: Option<usize>| c.map(|c| record[c].trim()).filter(|v| !v.is_empty());
            let Some(value) = field(test).or(field(dev)) else {
                continue;
            };
            let score: f64 = value
                .parse()
                .with_context(|| format!("{}: row {}: bad score {value:?}", path.display(), i + 2))?;
            let bs: usize = record[batch]
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}: bad batch size", path.display(), i + 2))?;
            scores.entry((record[loss].trim().to_string(), bs)).or_default().push(score);
        }
    }
    Ok(scores)
}

pub fn summarize(dir: &Path) -> Result<Summary> {
    let scores = collect(dir)?;
    if scores.is_empty() {
        bail!("no metrics found in {}", dir.display());
    }
    let cells: Vec<CellSummary> = scores
        .iter()
        .map(|((loss, batch_size), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            CellSummary {
                loss: loss.clone(),
                batch_size: *batch_size,
                seeds: v.len(),
                mean,
                stddev: var.sqrt(),
            }
        })
        .collect();

    let mut drops = Vec::new();
    let mut losses: Vec<&String> = cells.iter().map(|c| &c.loss).collect();
    losses.dedup();
    for loss in losses {
        let mine: Vec<&CellSummary> = cells.iter().filter(|c| &c.loss == loss).collect();
        if mine.len() >= 2 {
            // cells are ordered by batch size within a loss
            drops.push((loss.clone(), mine[mine.len() - 1].mean - mine[0].mean));
        }
    }
    Ok(Summary { cells, drops })
}

pub fn render(summary: &Summary) -> String {
    let mut out = String::new();
    for c in &summary.cells {
        out.push_str(&format!(
            "{:<8} batch {:>4}: {:.4} ± {:.4} (n={})\n",
            c.loss, c.batch_size, c.mean, c.stddev, c.seeds
        ));
    }
    for (loss, d) in &summary.drops {
        out.push_str(&format!("{loss}: drop from largest to smallest batch {d:.4}\n"));
    }
    match summary.most_robust() {
        Some(loss) => out.push_str(&format!("direction: {loss} degraded least with small batches\n")),
        None if summary.drops.len() >= 2 => out.push_str("direction: tie\n"),
        None => {}
    }
    out
}

pub fn run(args: &ReportArgs) -> Result<()> {
    print!("{}", render(&summarize(&args.dir)?));
    Ok(())
}
