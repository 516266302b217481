//! Multinomial logistic regression over normalized landmark features, trained
//! from scratch by mini-batch gradient descent, with a softmax confidence gate
//! at inference.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{expand_dataset, AugmentConfig, AugmentError, LabeledFrame};
use crate::landmark::{normalize, DimensionMismatch, GestureLabel, FEATURE_LEN, FEATURE_SPEC_VERSION};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("insufficient data: need at least two distinct labels, found {distinct}")]
    InsufficientData { distinct: usize },
    #[error("invalid train config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Linear softmax classifier. Weights are stored row-major, one row of
/// `FEATURE_LEN` per label.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    labels: Vec<GestureLabel>,
    weights: Vec<S>,
    bias: Vec<S>,
    threshold: S,
    feature_spec_version: u32,
}

/// Argmax result together with the full probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification<S> {
    pub class: usize,
    pub label: GestureLabel,
    pub confidence: S,
    pub accepted: bool,
    pub probabilities: Vec<S>,
}

/// Per-frame classifier output as it flows through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEvent {
    pub seq: u64,
    pub ts_ms: u64,
    pub label: Option<GestureLabel>,
    pub confidence: f64,
    pub accepted: bool,
    /// Time spent in normalize + classify.
    #[serde(default)]
    pub latency_us: f64,
}

impl PredictionEvent {
    pub fn from_classification<S: Scalar>(seq: u64, ts_ms: u64, c: &Classification<S>, latency_us: f64) -> Self {
        PredictionEvent {
            seq,
            ts_ms,
            label: Some(c.label),
            confidence: c.confidence.as_f64(),
            accepted: c.accepted,
            latency_us,
        }
    }

    /// A frame that produced no usable prediction; occupies a debounce slot as a gap.
    pub fn rejected(seq: u64, ts_ms: u64, latency_us: f64) -> Self {
        PredictionEvent { seq, ts_ms, label: None, confidence: 0.0, accepted: false, latency_us }
    }
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

impl<S: Scalar> Model<S> {
    pub fn new(
        labels: Vec<GestureLabel>,
        weights: Vec<Vec<S>>,
        bias: Vec<S>,
        threshold: S,
        feature_spec_version: u32,
    ) -> Result<Self, ClassifierError> {
        if weights.len() != labels.len() {
            return Err(ClassifierError::InvalidModel(format!(
                "{} weight rows for {} labels",
                weights.len(),
                labels.len()
            )));
        }
        if let Some(row) = weights.iter().find(|r| r.len() != FEATURE_LEN) {
            return Err(DimensionMismatch { expected: FEATURE_LEN, found: row.len() }.into());
        }
        let flat = weights.into_iter().flatten().collect();
        Self::from_flat(labels, flat, bias, threshold, feature_spec_version)
    }

    fn from_flat(
        labels: Vec<GestureLabel>,
        weights: Vec<S>,
        bias: Vec<S>,
        threshold: S,
        feature_spec_version: u32,
    ) -> Result<Self, ClassifierError> {
        let invalid = |m: String| Err(ClassifierError::InvalidModel(m));
        if labels.is_empty() {
            return invalid("no labels".into());
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return invalid(format!("duplicate label {l}"));
            }
        }
        if bias.len() != labels.len() {
            return invalid(format!("{} biases for {} labels", bias.len(), labels.len()));
        }
        if weights.len() != labels.len() * FEATURE_LEN {
            return invalid("weight matrix shape".into());
        }
        if !(threshold >= S::zero() && threshold <= S::one()) {
            return invalid(format!("threshold {threshold} outside [0, 1]"));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return invalid("non-finite parameter".into());
        }
        Ok(Model { labels, weights, bias, threshold, feature_spec_version })
    }

    /// All-zero model over `labels`.
    pub fn zeros(labels: Vec<GestureLabel>, threshold: S) -> Result<Self, ClassifierError> {
        let n = labels.len();
        Self::from_flat(labels, vec![S::zero(); n * FEATURE_LEN], vec![S::zero(); n], threshold, FEATURE_SPEC_VERSION)
    }

    pub fn labels(&self) -> &[GestureLabel] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn weight_row(&self, class: usize) -> &[S] {
        &self.weights[class * FEATURE_LEN..(class + 1) * FEATURE_LEN]
    }

    pub fn weights_flat(&self) -> &[S] {
        &self.weights
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    pub fn threshold(&self) -> S {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: S) -> Result<(), ClassifierError> {
        if !(threshold >= S::zero() && threshold <= S::one()) {
            return Err(ClassifierError::InvalidModel(format!("threshold {threshold} outside [0, 1]")));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn feature_spec_version(&self) -> u32 {
        self.feature_spec_version
    }

    pub fn class_of(&self, label: GestureLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Parameters as (rows, bias), the persisted layout.
    pub fn weight_rows(&self) -> Vec<Vec<S>> {
        self.weights.chunks(FEATURE_LEN).map(<[S]>::to_vec).collect()
    }

    pub fn logits(&self, features: &[S]) -> Result<Vec<S>, ClassifierError> {
        if features.len() != FEATURE_LEN {
            return Err(DimensionMismatch { expected: FEATURE_LEN, found: features.len() }.into());
        }
        Ok(self
            .weights
            .chunks(FEATURE_LEN)
            .zip(&self.bias)
            .map(|(row, &b)| dot(row, features) + b)
            .collect())
    }

    pub fn probabilities(&self, features: &[S]) -> Result<Vec<S>, ClassifierError> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Argmax with ties going to the lowest class index.
    pub fn classify(&self, features: &[S]) -> Result<Classification<S>, ClassifierError> {
        let probabilities = self.probabilities(features)?;
        let mut class = 0;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[class] {
                class = i;
            }
        }
        let confidence = probabilities[class];
        Ok(Classification {
            class,
            label: self.labels[class],
            confidence,
            accepted: confidence >= self.threshold,
            probabilities,
        })
    }

    /// Classifies and times the call; `latency_us` covers classification only.
    pub fn predict(&self, seq: u64, ts_ms: u64, features: &[S]) -> Result<PredictionEvent, ClassifierError> {
        let start = Instant::now();
        let c = self.classify(features)?;
        let latency = start.elapsed().as_secs_f64() * 1e6;
        Ok(PredictionEvent::from_classification(seq, ts_ms, &c, latency))
    }
}

/// A normalized feature vector with its class index in the model's label list.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<S> {
    pub features: Vec<S>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<S> {
    /// Row-major, same layout as the model weights.
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

/// Mean cross-entropy plus `(l2 / 2) * ||W||^2`, and its exact gradient.
pub fn loss_and_grad<S: Scalar>(model: &Model<S>, batch: &[Example<S>], l2: S) -> Result<(S, Gradient<S>), ClassifierError> {
    if batch.is_empty() {
        return Err(ClassifierError::EmptyBatch);
    }
    let c = model.num_classes();
    let mut gw = vec![S::zero(); c * FEATURE_LEN];
    let mut gb = vec![S::zero(); c];
    let mut loss = S::zero();
    for ex in batch {
        if ex.class >= c {
            return Err(ClassifierError::ClassOutOfRange(ex.class));
        }
        let p = model.probabilities(&ex.features)?;
        loss = loss - p[ex.class].max(S::min_positive_value()).ln();
        for k in 0..c {
            let g = if k == ex.class { p[k] - S::one() } else { p[k] };
            gb[k] = gb[k] + g;
            let row = &mut gw[k * FEATURE_LEN..(k + 1) * FEATURE_LEN];
            for (w, &x) in row.iter_mut().zip(&ex.features) {
                *w = *w + g * x;
            }
        }
    }
    let n = S::from_usize(batch.len()).expect("batch size representable");
    let half = S::lit(0.5);
    let mut reg = S::zero();
    for (g, &w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
        reg = reg + w * w;
    }
    for g in gb.iter_mut() {
        *g = *g / n;
    }
    Ok((loss / n + half * l2 * reg, Gradient { weights: gw, bias: gb }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub augment: AugmentConfig,
    pub copies_per_sample: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 64,
            l2: 1e-4,
            augment: AugmentConfig::default(),
            copies_per_sample: 10,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(TrainError::InvalidConfig("l2 must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(TrainError::InvalidConfig("threshold must lie in [0, 1]"));
        }
        self.augment.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub model: Model<S>,
    /// Frames dropped because they could not be normalized.
    pub skipped_frames: usize,
    /// Mean mini-batch loss per epoch (each measured before its update).
    pub loss_history: Vec<f64>,
    pub examples: usize,
}

/// Gradient descent over already-normalized examples.
pub fn fit<S: Scalar>(
    labels: Vec<GestureLabel>,
    examples: &[Example<S>],
    cfg: &TrainConfig,
) -> Result<(Model<S>, Vec<f64>), TrainError> {
    cfg.validate()?;
    let mut model = Model::zeros(labels, S::lit(cfg.threshold))?;
    let lr = S::lit(cfg.learning_rate);
    let l2 = S::lit(cfg.l2);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4521);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size.min(examples.len()));
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (loss, grad) = loss_and_grad(&model, &batch, l2)?;
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                *w = *w - lr * *g;
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b = *b - lr * *g;
            }
            epoch_loss += loss.as_f64();
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    if model.weights.iter().chain(model.bias.iter()).any(|v| !v.is_finite()) {
        return Err(TrainError::InvalidConfig("training diverged; lower learning_rate"));
    }
    Ok((model, history))
}

/// Expands `data` with augmentation, normalizes it, and fits a model over the
/// full 27-label alphabet. Frames that fail normalization are skipped and counted.
pub fn train<S: Scalar>(data: &[LabeledFrame<S>], cfg: &TrainConfig) -> Result<TrainOutcome<S>, TrainError> {
    cfg.validate()?;
    let mut skipped = 0usize;
    let usable: Vec<LabeledFrame<S>> = data
        .iter()
        .filter(|s| {
            let ok = normalize(&s.frame).is_ok();
            if !ok {
                skipped += 1;
            }
            ok
        })
        .cloned()
        .collect();
    let mut distinct: Vec<GestureLabel> = usable.iter().map(|s| s.label).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(TrainError::InsufficientData { distinct: distinct.len() });
    }

    let expanded = expand_dataset(&usable, cfg.copies_per_sample, &cfg.augment)?;
    let labels = GestureLabel::ALL.to_vec();
    let mut examples = Vec::with_capacity(expanded.len());
    for s in &expanded {
        match normalize(&s.frame) {
            Ok(f) => examples.push(Example { features: f.into_vec(), class: s.label.index() }),
            Err(_) => skipped += 1,
        }
    }
    let (model, loss_history) = fit(labels, &examples, cfg)?;
    Ok(TrainOutcome { model, skipped_frames: skipped, loss_history, examples: examples.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Indexed like `GestureLabel::ALL`; `None` for labels absent from the data.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are ground truth, columns predictions, both indexed like `GestureLabel::ALL`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub skipped: usize,
}

/// Top-1 evaluation with an arbitrary predictor; `None` predictions are skipped.
pub fn evaluate_with<S, F>(data: &[LabeledFrame<S>], mut predict: F) -> Evaluation
where
    F: FnMut(&LabeledFrame<S>) -> Option<GestureLabel>,
{
    let n = GestureLabel::COUNT;
    let mut confusion = vec![vec![0usize; n]; n];
    let mut skipped = 0;
    for sample in data {
        match predict(sample) {
            Some(p) => confusion[sample.label.index()][p.index()] += 1,
            None => skipped += 1,
        }
    }
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let count: usize = row.iter().sum();
            (count > 0).then(|| row[i] as f64 / count as f64)
        })
        .collect();
    Evaluation {
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        per_class_accuracy,
        confusion,
        total,
        skipped,
    }
}

/// Top-1 accuracy ignoring the confidence threshold.
pub fn evaluate<S: Scalar>(model: &Model<S>, data: &[LabeledFrame<S>]) -> Evaluation {
    evaluate_with(data, |s| {
        let f = normalize(&s.frame).ok()?;
        model.classify(f.as_slice()).ok().map(|c| c.label)
    })
}
