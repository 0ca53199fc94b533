use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Conversation, Labeled, Turn, VectorExample};
use crate::error::{Error, Result};
use crate::numerics::l2_normalize;

/// Per-class sample counts of the extreme-imbalance preset
/// (neutral, joy, surprise, anger, sadness, disgust, fear).
pub const MELD_IMBALANCE_COUNTS: [usize; 7] = [1024, 128, 64, 32, 32, 32, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub count: usize,
    pub center: Vec<f64>,
    /// Standard deviation of the per-coordinate gaussian perturbation.
    pub spread: f64,
}

/// `count` independent standard-normal directions, unit-normalized.
pub fn random_directions<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::Config("direction dimension must be positive".into()));
    }
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(u) = l2_normalize(&v) {
                break Ok(u);
            }
        })
        .collect()
}

/// Draws `normalize(center + spread · N(0, I))` points for each class in
/// turn; the class label is the index into `specs`. Output is class-major.
pub fn generate_synthetic_clusters<R: Rng + ?Sized>(
    specs: &[ClusterSpec],
    dim: usize,
    rng: &mut R,
) -> Result<Vec<VectorExample>> {
    if dim < 2 {
        return Err(Error::Config(format!("cluster dimension must be at least 2, got {dim}")));
    }
    let mut out = Vec::with_capacity(specs.iter().map(|s| s.count).sum());
    for (label, spec) in specs.iter().enumerate() {
        if spec.center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: spec.center.len(),
            });
        }
        if !(spec.spread >= 0.0 && spec.spread.is_finite()) {
            return Err(Error::Config(format!("invalid spread {}", spec.spread)));
        }
        let center = l2_normalize(&spec.center)?;
        for _ in 0..spec.count {
            let features = loop {
                let p: Vec<f64> = center
                    .iter()
                    .map(|c| c + spec.spread * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if let Ok(u) = l2_normalize(&p) {
                    break u;
                }
            };
            out.push(VectorExample { features, label });
        }
    }
    Ok(out)
}

/// Uniform without-replacement draw of exactly `counts[c]` items of every
/// class `c`. Items keep their original relative order.
pub fn imbalanced_subset<T: Labeled + Clone, R: Rng + ?Sized>(
    dataset: &[T],
    counts: &[usize],
    rng: &mut R,
) -> Result<Vec<T>> {
    let mut chosen = Vec::new();
    for (class, &requested) in counts.iter().enumerate() {
        let members: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, x)| x.label() == class)
            .map(|(i, _)| i)
            .collect();
        if requested > members.len() {
            return Err(Error::InsufficientPopulation {
                class,
                requested,
                available: members.len(),
            });
        }
        chosen.extend(index::sample(rng, members.len(), requested).into_iter().map(|k| members[k]));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| dataset[i].clone()).collect())
}

/// Cluster-dataset recipe: class `c` gets `train_counts[c]` training points
/// and balanced dev/test holdouts drawn around the same centers.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_counts: Vec<usize>,
    pub dev_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    pub spread: f64,
}

impl SplitSpec {
    /// Seven classes with counts 1024, 128, 64, 32, 32, 32, 32.
    pub fn meld_imbalance() -> Self {
        Self {
            train_counts: MELD_IMBALANCE_COUNTS.to_vec(),
            dev_per_class: 50,
            test_per_class: 100,
            dim: 16,
            spread: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<VectorExample>,
    pub dev: Vec<VectorExample>,
    pub test: Vec<VectorExample>,
}

/// Draws random class centers, a balanced pool of `max(train_counts)` points
/// per class, the imbalanced training subset of that pool, and the holdouts.
pub fn generate_cluster_splits<R: Rng + ?Sized>(spec: &SplitSpec, rng: &mut R) -> Result<DatasetSplits> {
    if spec.train_counts.is_empty() {
        return Err(Error::Config("at least one class is required".into()));
    }
    let centers = random_directions(spec.train_counts.len(), spec.dim, rng)?;
    let specs_with = |count: usize| -> Vec<ClusterSpec> {
        centers
            .iter()
            .map(|center| ClusterSpec {
                count,
                center: center.clone(),
                spread: spec.spread,
            })
            .collect()
    };
    let pool_size = spec.train_counts.iter().copied().max().unwrap_or(0);
    let pool = generate_synthetic_clusters(&specs_with(pool_size), spec.dim, rng)?;
    let train = imbalanced_subset(&pool, &spec.train_counts, rng)?;
    let dev = generate_synthetic_clusters(&specs_with(spec.dev_per_class), spec.dim, rng)?;
    let test = generate_synthetic_clusters(&specs_with(spec.test_per_class), spec.dim, rng)?;
    Ok(DatasetSplits { train, dev, test })
}

/// Toy dialogue generator: every class owns a small vocabulary of cue words,
/// and each utterance mixes cue words of its label with shared filler.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationGenConfig {
    pub dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Relative frequency of each label.
    pub class_weights: Vec<f64>,
    pub cue_words_per_class: usize,
    pub filler_words: usize,
    /// Probability that a token is a cue word of the turn's label.
    pub cue_rate: f64,
    pub speakers: Vec<String>,
}

impl Default for ConversationGenConfig {
    fn default() -> Self {
        Self {
            dialogues: 50,
            min_turns: 2,
            max_turns: 10,
            class_weights: vec![1.0; 3],
            cue_words_per_class: 6,
            filler_words: 40,
            cue_rate: 0.4,
            speakers: ["alice", "bob", "carol", "dave"].map(String::from).to_vec(),
        }
    }
}

pub fn generate_synthetic_conversations<R: Rng + ?Sized>(
    cfg: &ConversationGenConfig,
    rng: &mut R,
) -> Result<Vec<Conversation>> {
    if cfg.min_turns == 0 || cfg.min_turns > cfg.max_turns {
        return Err(Error::Config(format!(
            "invalid turn range {}..={}",
            cfg.min_turns, cfg.max_turns
        )));
    }
    if cfg.speakers.is_empty() || cfg.class_weights.is_empty() {
        return Err(Error::Config("need at least one speaker and one class".into()));
    }
    if cfg.cue_words_per_class == 0 || cfg.filler_words == 0 {
        return Err(Error::Config("vocabulary sizes must be positive".into()));
    }
    let total: f64 = cfg.class_weights.iter().sum();
    if total.is_nan() || total <= 0.0 || cfg.class_weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Config("class weights must be non-negative with a positive sum".into()));
    }
    let draw_label = |rng: &mut R| {
        let mut x = rng.random::<f64>() * total;
        for (i, w) in cfg.class_weights.iter().enumerate() {
            if x < *w {
                return i;
            }
            x -= w;
        }
        cfg.class_weights.len() - 1
    };

    let mut out = Vec::with_capacity(cfg.dialogues);
    for d in 0..cfg.dialogues {
        let n_turns = rng.random_range(cfg.min_turns..=cfg.max_turns);
        let turns = (0..n_turns)
            .map(|_| {
                let label = draw_label(rng);
                let len = rng.random_range(3..=8);
                let text = (0..len)
                    .map(|_| {
                        if rng.random_bool(cfg.cue_rate) {
                            format!("cue{label}_{}", rng.random_range(0..cfg.cue_words_per_class))
                        } else {
                            format!("w{}", rng.random_range(0..cfg.filler_words))
                        }
                    })
                    .collect();
                Turn {
                    speaker: cfg.speakers[rng.random_range(0..cfg.speakers.len())].clone(),
                    text,
                    label,
                }
            })
            .collect();
        out.push(Conversation {
            id: format!("dialogue-{d}"),
            turns,
        });
    }
    Ok(out)
}
