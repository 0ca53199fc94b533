//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! loss = spcl
//! batch_size = 16
//! train = data/train.jsonl
//! ```
//!
//! Keys are typed; an unknown key, a repeated key or a malformed value is an
//! error naming the line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use spcl_core::trainer::{LossKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    #[default]
    Vector,
    Conversation,
}

impl FromStr for DataFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(DataFormat::Vector),
            "conversation" => Ok(DataFormat::Conversation),
            other => bail!("unknown format {other:?} (expected vector or conversation)"),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Vector => "vector",
            DataFormat::Conversation => "conversation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub format: DataFormat,
    /// Label names for conversation files, in id order.
    pub labels: Vec<String>,
    pub out: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub batch_sizes: Vec<usize>,
    pub losses: Vec<LossKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            train_path: None,
            dev_path: None,
            test_path: None,
            format: DataFormat::Vector,
            labels: Vec::new(),
            out: None,
            seeds: vec![0, 1, 2, 3, 4],
            batch_sizes: vec![4, 8, 16, 32],
            losses: vec![LossKind::SupCon, LossKind::Spcl],
        }
    }
}

pub const KEYS: &[&str] = &[
    "loss",
    "curriculum",
    "epochs",
    "batch_size",
    "temperature",
    "queue_capacity",
    "support_size",
    "lr",
    "weight_decay",
    "lr_floor",
    "seed",
    "hidden_dim",
    "output_dim",
    "context_window",
    "max_len",
    "hash_dim",
    "train",
    "dev",
    "test",
    "format",
    "labels",
    "out",
    "seeds",
    "batch_sizes",
    "losses",
];

pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("{s:?}: {e}")))
        .collect()
}

pub fn parse_switch(value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        other => bail!("expected on or off, got {other:?}"),
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("{value:?}: {e}"))
}

impl RunConfig {
    /// Paths in the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                bail!("line {}: duplicate key {key:?}", i + 1);
            }
            seen.push(key);
            cfg.set(key, value, base).with_context(|| format!("line {}: key {key:?}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let t = &mut self.train;
        let path = |v: &str| base.join(v);
        match key {
            "loss" => t.loss = parse(value)?,
            "curriculum" => t.curriculum = parse_switch(value)?,
            "epochs" => t.epochs = parse(value)?,
            "batch_size" => t.batch_size = parse(value)?,
            "temperature" => t.temperature = parse(value)?,
            "queue_capacity" => t.queue_capacity = parse(value)?,
            "support_size" => t.support_size = parse(value)?,
            "lr" => t.optimizer.lr = parse(value)?,
            "weight_decay" => t.optimizer.weight_decay = parse(value)?,
            "lr_floor" => t.optimizer.lr_floor = parse(value)?,
            "seed" => t.seed = parse(value)?,
            "hidden_dim" => t.hidden_dim = parse(value)?,
            "output_dim" => t.output_dim = parse(value)?,
            "context_window" => t.context_window = parse(value)?,
            "max_len" => t.max_len = parse(value)?,
            "hash_dim" => t.hash_dim = parse(value)?,
            "train" => self.train_path = Some(path(value)),
            "dev" => self.dev_path = Some(path(value)),
            "test" => self.test_path = Some(path(value)),
            "format" => self.format = parse(value)?,
            "labels" => self.labels = parse_list(value)?,
            "out" => self.out = Some(path(value)),
            "seeds" => self.seeds = parse_list(value)?,
            "batch_sizes" => self.batch_sizes = parse_list(value)?,
            "losses" => self.losses = parse_list(value)?,
            other => bail!("unknown key {other:?} (known keys: {})", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Renders every key, so that `parse(render())` reproduces the config.
    pub fn render(&self) -> String {
        let t = &self.train;
        let join = |v: &[String]| v.join(",");
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut lines = vec![
            format!("loss = {}", t.loss),
            format!("curriculum = {}", if t.curriculum { "on" } else { "off" }),
            format!("epochs = {}", t.epochs),
            format!("batch_size = {}", t.batch_size),
            format!("temperature = {}", t.temperature),
            format!("queue_capacity = {}", t.queue_capacity),
            format!("support_size = {}", t.support_size),
            format!("lr = {}", t.optimizer.lr),
            format!("weight_decay = {}", t.optimizer.weight_decay),
            format!("lr_floor = {}", t.optimizer.lr_floor),
            format!("seed = {}", t.seed),
            format!("hidden_dim = {}", t.hidden_dim),
            format!("output_dim = {}", t.output_dim),
            format!("context_window = {}", t.context_window),
            format!("max_len = {}", t.max_len),
            format!("hash_dim = {}", t.hash_dim),
            format!("format = {}", self.format),
            format!("seeds = {}", join(&self.seeds.iter().map(u64::to_string).collect::<Vec<_>>())),
            format!(
                "batch_sizes = {}",
                join(&self.batch_sizes.iter().map(usize::to_string).collect::<Vec<_>>())
            ),
            format!("losses = {}", join(&self.losses.iter().map(LossKind::to_string).collect::<Vec<_>>())),
        ];
        if !self.labels.is_empty() {
            lines.push(format!("labels = {}", self.labels.join(",")));
        }
        for (key, p) in [
            ("train", &self.train_path),
            ("dev", &self.dev_path),
            ("test", &self.test_path),
            ("out", &self.out),
        ] {
            if let Some(p) = opt_path(p) {
                lines.push(format!("{key} = {p}"));
            }
        }
        lines.join("\n") + "\n"
    }
}
