//! The training loop: per-epoch difficulty ranking, curriculum subset,
//! per-class queue maintenance and contrastive optimization, with
//! best-on-dev checkpoint selection.

mod heads;
mod metrics;
mod optim;

pub use heads::{predict_center_match, train_linear_probe, LinearProbe, ProbeGrads};
pub use metrics::{weighted_f1, ConfusionMatrix, EpochMetrics, MetricsReport, METRICS_CSV_HEADER};
pub use optim::{optimizer_step, AdamState, CosineSchedule, OptimizerConfig};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curriculum::{
    class_centers, difficulties, epoch_keep_probabilities, order_by_difficulty, sample_epoch_subset, ClassCenters,
};
use crate::data::{PairConfig, VectorExample, DEFAULT_CONTEXT_WINDOW, DEFAULT_MAX_LEN};
use crate::encoder::{Encoder, ToyEncoder, DEFAULT_HASH_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_OUTPUT_DIM, MIN_HASH_DIM};
use crate::error::{Error, Result};
use crate::losses::{spcl_loss, supcon_loss, BatchView, LossConfig, DEFAULT_TEMPERATURE};
use crate::protomem::{QueueBank, DEFAULT_QUEUE_CAPACITY, DEFAULT_SUPPORT_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossKind {
    CrossEntropy,
    SupCon,
    Spcl,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::CrossEntropy, LossKind::SupCon, LossKind::Spcl];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::SupCon => "supcon",
            LossKind::Spcl => "spcl",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown loss {s:?} (expected ce, supcon or spcl)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub curriculum: bool,
    /// `R`; epochs `0..=R` are run, so the last epoch is fully hard-biased.
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub queue_capacity: usize,
    /// Prototype support size; clamps to the queue length when larger.
    pub support_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Dialogue inputs only: history window, token budget and hash width.
    pub context_window: usize,
    pub max_len: usize,
    pub hash_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Spcl,
            curriculum: true,
            epochs: 30,
            batch_size: 16,
            temperature: DEFAULT_TEMPERATURE,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            support_size: DEFAULT_SUPPORT_SIZE,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            output_dim: DEFAULT_OUTPUT_DIM,
            context_window: DEFAULT_CONTEXT_WINDOW,
            max_len: DEFAULT_MAX_LEN,
            hash_dim: DEFAULT_HASH_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        let min_batch = if self.loss == LossKind::SupCon { 2 } else { 1 };
        if self.batch_size < min_batch {
            return fail(format!(
                "batch size must be at least {min_batch} for {} loss, got {}",
                self.loss, self.batch_size
            ));
        }
        if self.queue_capacity == 0 || self.support_size == 0 {
            return fail("queue capacity and support size must be at least 1".into());
        }
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return fail("encoder dimensions must be positive".into());
        }
        if self.hash_dim < MIN_HASH_DIM {
            return fail(format!("hash_dim must be at least {MIN_HASH_DIM}"));
        }
        LossConfig::new(self.temperature)?;
        self.optimizer.validate()?;
        self.pair_config().validate()
    }

    pub fn pair_config(&self) -> PairConfig {
        PairConfig {
            window: self.context_window,
            max_len: self.max_len,
            ..PairConfig::default()
        }
    }
}

/// The kept checkpoint: encoder, centers over the full training set, and
/// the classification head when the loss trains one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoder: ToyEncoder,
    pub centers: ClassCenters,
    pub probe: Option<LinearProbe>,
    pub loss: LossKind,
    pub temperature: f64,
}

impl TrainedModel {
    pub fn encode_all(&self, data: &[VectorExample]) -> Result<Vec<Vec<f64>>> {
        encode_all(&self.encoder, data)
    }

    /// Linear head when present, otherwise center matching.
    pub fn predict_rep(&self, z: &[f64]) -> Result<usize> {
        match &self.probe {
            Some(probe) => probe.predict(z),
            None => predict_center_match(z, &self.centers, self.temperature).map(|(label, _)| label),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        self.predict_rep(&self.encoder.encode(features)?)
    }

    /// Whether `label` is one the model can ever predict.
    pub fn knows_label(&self, label: usize) -> bool {
        match &self.probe {
            Some(probe) => label < probe.classes() && self.centers.get(label).is_some(),
            None => self.centers.get(label).is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub weighted_f1: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
    /// Examples whose gold label never occurred in training; always wrong.
    pub unseen_labels: usize,
}

pub fn evaluate(model: &TrainedModel, data: &[VectorExample]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set".into()));
    }
    let reps = model.encode_all(data)?;
    evaluate_reps(model, &reps, data)
}

fn evaluate_reps(model: &TrainedModel, reps: &[Vec<f64>], data: &[VectorExample]) -> Result<Evaluation> {
    let predictions = reps.iter().map(|z| model.predict_rep(z)).collect::<Result<Vec<_>>>()?;
    let golds: Vec<usize> = data.iter().map(|e| e.label).collect();
    let confusion = ConfusionMatrix::from_predictions(&predictions, &golds)?;
    Ok(Evaluation {
        weighted_f1: confusion.weighted_f1(),
        confusion,
        predictions,
        unseen_labels: golds.iter().filter(|&&g| !model.knows_label(g)).count(),
    })
}

pub fn encode_all<E: Encoder>(encoder: &E, data: &[VectorExample]) -> Result<Vec<Vec<f64>>> {
    data.iter()
        .enumerate()
        .map(|(i, e)| encoder.encode(&e.features).map_err(|err| err.context(format!("example {i}"))))
        .collect()
}

/// What one optimizer step saw.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub loss: f64,
    /// Detached representations pushed to the queues after the step.
    pub reps: Vec<Vec<f64>>,
    pub prototypes_used: usize,
}

/// Training state owned by one run: parameters, optimizer moments, queues
/// and the single random source.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    train: &'a [VectorExample],
    labels: Vec<usize>,
    encoder: ToyEncoder,
    head: Option<LinearProbe>,
    state: AdamState,
    schedule: CosineSchedule,
    step: u64,
    queues: QueueBank,
    loss_cfg: LossConfig,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, train: &'a [VectorExample]) -> Result<Self> {
        cfg.validate()?;
        let input_dim = check_examples(train, None, "training set")?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let encoder = ToyEncoder::new(input_dim, cfg.hidden_dim, cfg.output_dim, &mut rng)?;
        let labels: Vec<usize> = train.iter().map(|e| e.label).collect();
        let head = match cfg.loss {
            LossKind::CrossEntropy => {
                let classes = labels.iter().max().map_or(1, |m| m + 1);
                Some(LinearProbe::new(classes, cfg.output_dim, &mut rng)?)
            }
            _ => None,
        };
        let sizes = encoder
            .param_blocks()
            .iter()
            .map(|(_, b)| b.len())
            .chain(head.iter().flat_map(LinearProbe::block_sizes))
            .collect::<Vec<_>>();
        let schedule = CosineSchedule {
            peak: cfg.optimizer.lr,
            floor: cfg.optimizer.lr_floor,
            total_steps: planned_steps(&cfg, train.len())?,
        };
        Ok(Self {
            queues: QueueBank::new(cfg.queue_capacity, cfg.output_dim)?,
            loss_cfg: LossConfig::new(cfg.temperature)?,
            state: AdamState::new(sizes),
            step: 0,
            cfg,
            train,
            labels,
            encoder,
            head,
            schedule,
            rng,
        })
    }

    pub fn encoder(&self) -> &ToyEncoder {
        &self.encoder
    }

    pub fn queues(&self) -> &QueueBank {
        &self.queues
    }

    pub fn schedule(&self) -> &CosineSchedule {
        &self.schedule
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn encode_train(&self) -> Result<Vec<Vec<f64>>> {
        encode_all(&self.encoder, self.train)
    }

    /// Indices trained on in epoch `k`, in the order they will be batched.
    /// `reps` are the current representations of the whole training set.
    pub fn epoch_subset(&mut self, epoch: usize, reps: &[Vec<f64>]) -> Result<Vec<usize>> {
        let mut subset = if self.cfg.curriculum {
            let centers = class_centers(reps, &self.labels)?;
            let order = order_by_difficulty(&difficulties(reps, &self.labels, &centers)?);
            let schedule = epoch_keep_probabilities(epoch, self.cfg.epochs, self.train.len())?;
            sample_epoch_subset(&order, &schedule, &mut self.rng)?
        } else {
            (0..self.train.len()).collect()
        };
        subset.shuffle(&mut self.rng);
        Ok(subset)
    }

    pub fn clear_queues(&mut self) {
        self.queues.clear();
    }

    /// Forward, loss, backward and one optimizer step on `indices`; the
    /// batch representations are pushed to the queues only afterwards.
    pub fn train_batch(&mut self, indices: &[usize]) -> Result<BatchOutcome> {
        let mut reps = Vec::with_capacity(indices.len());
        let mut caches = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = self
                .train
                .get(i)
                .ok_or_else(|| Error::Config(format!("training index {i} out of range")))?;
            let (z, cache) = self.encoder.forward(&ex.features)?;
            reps.push(z);
            caches.push(cache);
            labels.push(ex.label);
        }

        let mut prototypes_used = 0;
        let (loss, rep_grads, head_grads) = match self.cfg.loss {
            LossKind::Spcl => {
                let protos = self.queues.prototypes(self.cfg.support_size, &mut self.rng)?;
                prototypes_used = protos.len();
                let out = spcl_loss(&BatchView::new(&reps, &labels)?, &protos, &self.loss_cfg)?;
                (out.value, out.grads, None)
            }
            LossKind::SupCon => {
                let out = supcon_loss(&BatchView::new(&reps, &labels)?, &self.loss_cfg)?;
                (out.value, out.grads, None)
            }
            LossKind::CrossEntropy => {
                let head = self.head.as_ref().expect("cross-entropy runs carry a head");
                let out = head.loss_and_grads(&reps, &labels)?;
                (out.value, out.reps, Some(out.params))
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("{} loss value", self.cfg.loss)));
        }

        let mut grads = self.encoder.zero_grads();
        for (cache, g) in caches.iter().zip(&rep_grads) {
            self.encoder.backward(cache, g, &mut grads)?;
        }
        let mut all_grads = grads.blocks;
        all_grads.extend(head_grads.into_iter().flatten());
        let mut params = self.encoder.param_blocks_mut();
        if let Some(head) = self.head.as_mut() {
            params.extend(head.param_blocks_mut());
        }
        let lr = self.schedule.lr_at(self.step);
        optimizer_step(&mut params, &all_grads, &mut self.state, lr, &self.cfg.optimizer)?;
        self.step += 1;

        if self.cfg.loss == LossKind::Spcl {
            for (z, &y) in reps.iter().zip(&labels) {
                self.queues.push(y, z)?;
            }
        }
        Ok(BatchOutcome {
            loss,
            reps,
            prototypes_used,
        })
    }

    /// Snapshot of the current parameters with centers from `reps`.
    pub fn model(&self, reps: &[Vec<f64>]) -> Result<TrainedModel> {
        Ok(TrainedModel {
            encoder: self.encoder.clone(),
            centers: class_centers(reps, &self.labels)?,
            probe: self.head.clone(),
            loss: self.cfg.loss,
            temperature: self.cfg.temperature,
        })
    }
}

/// Optimizer steps the cosine schedule spans: the expected number of
/// batches summed over all epochs.
fn planned_steps(cfg: &TrainConfig, train_len: usize) -> Result<u64> {
    let mut total = 0u64;
    for k in 0..=cfg.epochs {
        let expected = if cfg.curriculum {
            epoch_keep_probabilities(k, cfg.epochs, train_len)?.expected_size()
        } else {
            train_len as f64
        };
        total += (expected / cfg.batch_size as f64).ceil().max(1.0) as u64;
    }
    Ok(total)
}

/// Checks non-emptiness, a shared feature width and finiteness; returns the width.
fn check_examples(data: &[VectorExample], width: Option<usize>, what: &str) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::EmptyInput(what.to_string()))?;
    let width = width.unwrap_or(first.features.len());
    for (i, ex) in data.iter().enumerate() {
        if ex.features.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: ex.features.len(),
            }
            .context(format!("{what}, example {i}")));
        }
        if ex.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{what}, example {i}")));
        }
    }
    Ok(width)
}

/// Runs epochs `0..=R` and returns the dev-best checkpoint with its report.
pub fn train(
    cfg: &TrainConfig,
    train: &[VectorExample],
    dev: &[VectorExample],
    test: Option<&[VectorExample]>,
) -> Result<(TrainedModel, MetricsReport)> {
    let mut trainer = Trainer::new(cfg.clone(), train)?;
    let width = trainer.encoder.input_dim();
    check_examples(dev, Some(width), "dev set")?;
    if let Some(test) = test {
        check_examples(test, Some(width), "test set")?;
    }

    let mut reps = trainer.encode_train()?;
    let mut epochs = Vec::with_capacity(cfg.epochs + 1);
    let mut best: Option<(TrainedModel, usize, Evaluation, Option<Evaluation>)> = None;

    for k in 0..=cfg.epochs {
        let at_epoch = |e: Error| e.context(format!("epoch {k}"));
        let subset = trainer.epoch_subset(k, &reps).map_err(at_epoch)?;
        trainer.clear_queues();

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in subset.chunks(cfg.batch_size).enumerate() {
            // a trailing singleton has no pairs for SupCon
            if cfg.loss == LossKind::SupCon && chunk.len() < 2 {
                continue;
            }
            let outcome = trainer
                .train_batch(chunk)
                .map_err(|e| e.context(format!("epoch {k}, batch {b}")))?;
            loss_sum += outcome.loss;
            batches += 1;
        }

        reps = trainer.encode_train().map_err(at_epoch)?;
        let model = trainer.model(&reps).map_err(at_epoch)?;
        let train_eval = evaluate_reps(&model, &reps, train).map_err(at_epoch)?;
        let dev_eval = evaluate(&model, dev).map_err(at_epoch)?;
        let test_eval = test.map(|t| evaluate(&model, t)).transpose().map_err(at_epoch)?;

        epochs.push(EpochMetrics {
            epoch: k,
            loss: if batches > 0 { loss_sum / batches as f64 } else { 0.0 },
            subset_size: subset.len(),
            train_f1: train_eval.weighted_f1,
            dev_f1: dev_eval.weighted_f1,
            test_f1: test_eval.as_ref().map(|e| e.weighted_f1),
        });
        if best.as_ref().is_none_or(|(_, _, d, _)| dev_eval.weighted_f1 > d.weighted_f1) {
            best = Some((model, k, dev_eval, test_eval));
        }
    }

    let (model, best_epoch, dev_eval, test_eval) = best.expect("at least one epoch runs");
    let report = MetricsReport {
        epochs,
        best_epoch,
        best_dev_f1: dev_eval.weighted_f1,
        test_f1: test_eval.as_ref().map(|e| e.weighted_f1),
        dev_confusion: dev_eval.confusion,
        test_confusion: test_eval.map(|e| e.confusion),
    };
    Ok((model, report))
}
