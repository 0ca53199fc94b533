//! Loading train/dev/test splits as feature vectors.

use std::path::Path;

use anyhow::{bail, Context, Result};
use spcl_core::data::{
    conversation_pairs, evaluation_pairs, featurize_pairs, load_conversations, load_vector_examples, LabelTable,
    VectorExample,
};

use crate::config::{DataFormat, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<VectorExample>,
    pub dev: Vec<VectorExample>,
    pub test: Option<Vec<VectorExample>>,
    /// Label names for conversation data; empty for vector data.
    pub labels: Vec<String>,
}

/// Loads one file. Conversation training files expand into primary and
/// auxiliary pairs; evaluation files into primary pairs only.
pub fn load_examples(cfg: &RunConfig, path: &Path, training: bool) -> Result<Vec<VectorExample>> {
    match cfg.format {
        DataFormat::Vector => Ok(load_vector_examples(path)?),
        DataFormat::Conversation => {
            if cfg.labels.is_empty() {
                bail!("conversation data needs a `labels` list in the config");
            }
            let table = LabelTable::new(cfg.labels.iter().cloned())?;
            let convs = load_conversations(path, &table)?;
            let pair_cfg = cfg.train.pair_config();
            let pairs = if training {
                conversation_pairs(&convs, &pair_cfg, &mut spcl_core::seeded_rng(cfg.train.seed))?
            } else {
                evaluation_pairs(&convs, &pair_cfg)?
            };
            Ok(featurize_pairs(&pairs, cfg.train.hash_dim)?)
        }
    }
}

pub fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let Some(train_path) = &cfg.train_path else {
        bail!("no training data: set `train` in the config or pass --train");
    };
    let Some(dev_path) = &cfg.dev_path else {
        bail!("no dev data: set `dev` in the config or pass --dev (the kept checkpoint is chosen on it)");
    };
    let train = load_examples(cfg, train_path, true).context("loading training data")?;
    let dev = load_examples(cfg, dev_path, false).context("loading dev data")?;
    let test = cfg
        .test_path
        .as_ref()
        .map(|p| load_examples(cfg, p, false).context("loading test data"))
        .transpose()?;
    Ok(Splits {
        train,
        dev,
        test,
        labels: cfg.labels.clone(),
    })
}
