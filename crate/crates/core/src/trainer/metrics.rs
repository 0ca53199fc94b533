//! Weighted-F1, confusion counts, and the per-run metrics report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense gold × predicted count table over labels `0..size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[usize], golds: &[usize]) -> Result<Self> {
        if predictions.len() != golds.len() {
            return Err(Error::DimensionMismatch {
                expected: golds.len(),
                got: predictions.len(),
            });
        }
        if golds.is_empty() {
            return Err(Error::EmptyInput("no predictions to score".into()));
        }
        let size = predictions.iter().chain(golds).max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0; size]; size];
        for (&p, &g) in predictions.iter().zip(golds) {
            counts[g][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, gold: usize, predicted: usize) -> usize {
        self.counts
            .get(gold)
            .and_then(|row| row.get(predicted))
            .copied()
            .unwrap_or(0)
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn gold_support(&self, label: usize) -> usize {
        self.counts.get(label).map_or(0, |row| row.iter().sum())
    }

    pub fn predicted_count(&self, label: usize) -> usize {
        self.counts.iter().map(|row| row.get(label).copied().unwrap_or(0)).sum()
    }

    /// F1 of one class; 0 when it has neither predictions nor gold members.
    pub fn class_f1(&self, label: usize) -> f64 {
        let tp = self.get(label, label) as f64;
        let predicted = self.predicted_count(label) as f64;
        let support = self.gold_support(label) as f64;
        if predicted == 0.0 || support == 0.0 || tp == 0.0 {
            return 0.0;
        }
        let precision = tp / predicted;
        let recall = tp / support;
        2.0 * precision * recall / (precision + recall)
    }

    /// Per-class F1 weighted by gold support; classes without gold members
    /// carry zero weight.
    pub fn weighted_f1(&self) -> f64 {
        // divide once at the end so perfect predictions give exactly 1.0
        let weighted: f64 = (0..self.size())
            .filter(|&c| self.gold_support(c) > 0)
            .map(|c| self.class_f1(c) * self.gold_support(c) as f64)
            .sum();
        (weighted / self.total() as f64).clamp(0.0, 1.0)
    }
}

pub fn weighted_f1(predictions: &[usize], golds: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(predictions, golds)?.weighted_f1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean batch loss over the epoch's optimizer steps.
    pub loss: f64,
    pub subset_size: usize,
    pub train_f1: f64,
    pub dev_f1: f64,
    pub test_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose checkpoint was kept (strictly best dev F1, earliest wins).
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    /// Test F1 of the kept checkpoint.
    pub test_f1: Option<f64>,
    /// Dev confusion counts of the kept checkpoint.
    pub dev_confusion: ConfusionMatrix,
    pub test_confusion: Option<ConfusionMatrix>,
}

pub const METRICS_CSV_HEADER: &str = "epoch,loss,subset_size,dev_f1,test_f1";

impl MetricsReport {
    /// `epoch,loss,subset_size,dev_f1,test_f1`, one row per epoch; a
    /// missing test score is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            let test = e.test_f1.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", e.epoch, e.loss, e.subset_size, e.dev_f1, test);
        }
        out
    }

    /// One JSON object per epoch followed by a summary record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).map_err(|e| Error::NonFinite(e.to_string()))?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "best_epoch": self.best_epoch,
            "best_dev_f1": self.best_dev_f1,
            "test_f1": self.test_f1,
            "dev_confusion": self.dev_confusion.rows(),
            "test_confusion": self.test_confusion.as_ref().map(ConfusionMatrix::rows),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        Ok(out)
    }
}
