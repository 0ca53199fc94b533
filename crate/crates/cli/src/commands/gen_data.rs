use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use spcl_core::data::{
    generate_cluster_splits, generate_synthetic_conversations, write_conversations, write_vector_examples,
    ConversationGenConfig, LabelTable, SplitSpec,
};

use super::{output_dir, write_file};
use crate::config::{parse_list, DataFormat};

pub const MELD_LABELS: [&str; 7] = ["neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear"];

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Named preset; `meld-imbalance` gives 7 classes with counts
    /// 1024,128,64,32,32,32,32.
    #[arg(long)]
    pub preset: Option<String>,
    /// Per-class training counts (vector data) or class weights
    /// (conversation data), e.g. `5,5`.
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Per-coordinate gaussian noise around each class center.
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// vector or conversation.
    #[arg(long, default_value = "vector")]
    pub format: DataFormat,
    #[arg(long)]
    pub dev_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Number of training dialogues (conversation format).
    #[arg(long, default_value_t = 60)]
    pub dialogues: usize,
}

impl GenDataArgs {
    pub fn split_spec(&self) -> Result<SplitSpec> {
        let mut spec = match self.preset.as_deref() {
            Some("meld-imbalance") => SplitSpec::meld_imbalance(),
            Some(other) => bail!("unknown preset {other:?} (available: meld-imbalance)"),
            None if self.counts.is_none() => bail!("pass --preset or --counts"),
            None => SplitSpec {
                train_counts: Vec::new(),
                dev_per_class: 20,
                test_per_class: 20,
                ..SplitSpec::meld_imbalance()
            },
        };
        if let Some(counts) = &self.counts {
            spec.train_counts = parse_list(counts)?;
            if spec.train_counts.is_empty() {
                bail!("--counts needs at least one class");
            }
        }
        if let Some(dim) = self.dim {
            spec.dim = dim;
        }
        if let Some(spread) = self.spread {
            spec.spread = spread;
        }
        if let Some(n) = self.dev_per_class {
            spec.dev_per_class = n;
        }
        if let Some(n) = self.test_per_class {
            spec.test_per_class = n;
        }
        Ok(spec)
    }

    fn label_names(&self, classes: usize) -> Vec<String> {
        if classes == MELD_LABELS.len() && self.preset.is_some() {
            MELD_LABELS.iter().map(|s| s.to_string()).collect()
        } else {
            (0..classes).map(|c| format!("class{c}")).collect()
        }
    }
}

fn histogram(labels: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}

pub fn run(args: &GenDataArgs) -> Result<()> {
    let spec = args.split_spec()?;
    let mut rng = spcl_core::seeded_rng(args.seed);
    let names = args.label_names(spec.train_counts.len());

    let (files, histograms) = match args.format {
        DataFormat::Vector => {
            let splits = generate_cluster_splits(&spec, &mut rng)?;
            let mut files = Vec::new();
            let mut hists = Vec::new();
            for (name, data) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
                let mut buf = Vec::new();
                write_vector_examples(&mut buf, data)?;
                files.push((format!("{name}.jsonl"), buf));
                hists.push((name, histogram(data.iter().map(|e| e.label))));
            }
            (files, hists)
        }
        DataFormat::Conversation => {
            let table = LabelTable::new(names.iter().cloned())?;
            let weights: Vec<f64> = spec.train_counts.iter().map(|&c| c as f64).collect();
            let balanced = vec![1.0; weights.len()];
            let mut files = Vec::new();
            let mut hists = Vec::new();
            for (name, dialogues, class_weights) in [
                ("train", args.dialogues, weights),
                ("dev", args.dialogues.div_ceil(4), balanced.clone()),
                ("test", args.dialogues.div_ceil(4), balanced),
            ] {
                let cfg = ConversationGenConfig {
                    dialogues,
                    class_weights,
                    ..Default::default()
                };
                let convs = generate_synthetic_conversations(&cfg, &mut rng)?;
                let mut buf = Vec::new();
                write_conversations(&mut buf, &convs, &table)?;
                files.push((format!("{name}.jsonl"), buf));
                hists.push((name, histogram(convs.iter().flat_map(|c| c.turns.iter().map(|t| t.label)))));
            }
            (files, hists)
        }
    };

    let out = output_dir(Some(&args.out))?;
    for (name, contents) in &files {
        write_file(out, name, contents)?;
    }
    let mut cfg = format!("format = {}\ntrain = train.jsonl\ndev = dev.jsonl\ntest = test.jsonl\n", args.format);
    if args.format == DataFormat::Conversation {
        cfg.push_str(&format!("labels = {}\n", names.join(",")));
    }
    write_file(out, "dataset.cfg", cfg)?;

    for (split, hist) in histograms {
        let total: usize = hist.values().sum();
        println!("{split}: {total} examples");
        for (label, count) in hist {
            println!("  {:<10} {count}", names[label]);
        }
    }
    Ok(())
}
