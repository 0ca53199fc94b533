//! Dialogue and vector datasets, context/prompt assembly, and synthetic
//! generators.

mod io;
mod synthetic;

pub use io::{
    load_conversations, load_vector_examples, read_conversations, read_vector_examples, write_conversations,
    write_vector_examples, ConversationRecord, TurnRecord, VectorRecord,
};
pub use synthetic::{
    generate_cluster_splits, generate_synthetic_clusters, generate_synthetic_conversations, imbalanced_subset,
    random_directions, ClusterSpec, ConversationGenConfig, DatasetSplits, SplitSpec, MELD_IMBALANCE_COUNTS,
};

use rand::Rng;

use crate::encoder::featurize;
use crate::error::{Error, Result};

pub const MASK_TOKEN: &str = "<mask>";
pub const DEFAULT_CONTEXT_WINDOW: usize = 8;
pub const DEFAULT_MAX_LEN: usize = 256;
/// Template tokens other than the utterance and the speaker:
/// `for`, `,`, `fells`, `<mask>`.
pub const PROMPT_TEMPLATE_TOKENS: usize = 4;
const MIN_MAX_LEN: usize = PROMPT_TEMPLATE_TOKENS + 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: String,
    pub text: Vec<String>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOrigin {
    pub conversation: String,
    pub target_turn: usize,
    pub prompted_turn: usize,
}

/// Encoder input (context followed by a prompt) with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub input_tokens: Vec<String>,
    pub target_label: usize,
    pub origin: PairOrigin,
}

/// A labeled raw feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExample {
    pub features: Vec<f64>,
    pub label: usize,
}

pub trait Labeled {
    fn label(&self) -> usize;
}

impl Labeled for VectorExample {
    fn label(&self) -> usize {
        self.label
    }
}

impl Labeled for TrainingPair {
    fn label(&self) -> usize {
        self.target_label
    }
}

/// Ordered label names; a label id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(char::is_whitespace) || n.contains(',') {
                return Err(Error::Config(format!("invalid label name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate label name {n:?}")));
            }
        }
        Ok(Self { names })
    }

    /// `"0"`, `"1"`, ... for datasets with integer labels.
    pub fn numeric(classes: usize) -> Self {
        Self {
            names: (0..classes).map(|i| i.to_string()).collect(),
        }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Whitespace split with lowercasing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Renders a speaker name as exactly one token.
pub fn speaker_token(speaker: &str) -> String {
    let joined = speaker.split_whitespace().collect::<Vec<_>>().join("_");
    if joined.is_empty() {
        "_".to_string()
    } else {
        joined
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairConfig {
    /// Number of history turns before the target turn.
    pub window: usize,
    pub max_len: usize,
    /// Probability of emitting the auxiliary pair when history exists.
    pub aux_probability: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_CONTEXT_WINDOW,
            max_len: DEFAULT_MAX_LEN,
            aux_probability: 1.0,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len < MIN_MAX_LEN {
            return Err(Error::Config(format!(
                "max_len must be at least {MIN_MAX_LEN}, got {}",
                self.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.aux_probability) {
            return Err(Error::Config(format!(
                "aux_probability must lie in [0, 1], got {}",
                self.aux_probability
            )));
        }
        Ok(())
    }
}

/// `[s_{t-w}, u_{t-w}, ..., s_t, u_t]` with `w = min(window, t)`, keeping at
/// most `budget` tokens by dropping the oldest ones.
pub fn assemble_context(conv: &Conversation, t: usize, window: usize, budget: usize) -> Vec<String> {
    let start = t - window.min(t);
    let mut tokens = Vec::new();
    for turn in &conv.turns[start..=t] {
        tokens.push(speaker_token(&turn.speaker));
        tokens.extend(turn.text.iter().cloned());
    }
    if tokens.len() > budget {
        tokens.drain(..tokens.len() - budget);
    }
    tokens
}

/// `for <utterance> , <speaker> fells <mask>`
pub fn build_prompt(turn: &Turn) -> Vec<String> {
    let mut tokens = Vec::with_capacity(turn.text.len() + PROMPT_TEMPLATE_TOKENS + 1);
    tokens.push("for".to_string());
    tokens.extend(turn.text.iter().cloned());
    tokens.push(",".to_string());
    tokens.push(speaker_token(&turn.speaker));
    tokens.push("fells".to_string());
    tokens.push(MASK_TOKEN.to_string());
    tokens
}

/// Prompt trimmed (oldest utterance tokens first) to fit in `max_len`.
fn fitted_prompt(turn: &Turn, max_len: usize) -> Vec<String> {
    let mut prompt = build_prompt(turn);
    if prompt.len() > max_len {
        let excess = prompt.len() - max_len;
        prompt.drain(1..1 + excess);
    }
    prompt
}

/// The primary pair for turn `t` and, when history exists, one auxiliary
/// pair that shares the same context but prompts a random earlier in-window
/// turn `h` and carries `y_h`.
pub fn make_training_pairs<R: Rng + ?Sized>(
    conv: &Conversation,
    t: usize,
    cfg: &PairConfig,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    cfg.validate()?;
    if t >= conv.turns.len() {
        return Err(Error::Config(format!(
            "turn {t} out of range for conversation {:?} with {} turns",
            conv.id,
            conv.turns.len()
        )));
    }
    let history = cfg.window.min(t);
    let aux_turn = if history > 0 && rng.random_bool(cfg.aux_probability) {
        Some(rng.random_range(t - history..t))
    } else {
        None
    };

    let prompts: Vec<(usize, Vec<String>)> = std::iter::once(t)
        .chain(aux_turn)
        .map(|h| (h, fitted_prompt(&conv.turns[h], cfg.max_len)))
        .collect();
    let longest = prompts.iter().map(|(_, p)| p.len()).max().unwrap_or(0);
    let context = assemble_context(conv, t, cfg.window, cfg.max_len - longest);

    Ok(prompts
        .into_iter()
        .map(|(h, prompt)| {
            let mut input_tokens = context.clone();
            input_tokens.extend(prompt);
            TrainingPair {
                input_tokens,
                target_label: conv.turns[h].label,
                origin: PairOrigin {
                    conversation: conv.id.clone(),
                    target_turn: t,
                    prompted_turn: h,
                },
            }
        })
        .collect())
}

/// Pairs for every turn of every conversation, in order.
pub fn conversation_pairs<R: Rng + ?Sized>(
    conversations: &[Conversation],
    cfg: &PairConfig,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for conv in conversations {
        for t in 0..conv.turns.len() {
            out.extend(make_training_pairs(conv, t, cfg, rng)?);
        }
    }
    Ok(out)
}

/// Pairs for evaluation: the primary pair of every turn, no auxiliary pairs.
pub fn evaluation_pairs(conversations: &[Conversation], cfg: &PairConfig) -> Result<Vec<TrainingPair>> {
    let cfg = PairConfig {
        aux_probability: 0.0,
        ..cfg.clone()
    };
    // aux_probability = 0 never emits an auxiliary pair, so the seed is irrelevant
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    conversation_pairs(conversations, &cfg, &mut rng)
}

/// Hashes every pair's input tokens into a `hash_dim`-wide feature vector.
pub fn featurize_pairs(pairs: &[TrainingPair], hash_dim: usize) -> Result<Vec<VectorExample>> {
    pairs
        .iter()
        .map(|p| {
            Ok(VectorExample {
                features: featurize(&p.input_tokens, hash_dim)?,
                label: p.target_label,
            })
        })
        .collect()
}
