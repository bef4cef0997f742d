//! Mini-batch SGD with per-epoch history, stratified splitting, prediction
//! with a confident/unsure label, and evaluation.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::grid::PixelGrid;
use crate::network::{cross_entropy, Gradients, Network, NetworkConfig};
use crate::rng::{derive_seed, SeededRng};

/// A prediction is unsure when the top two probabilities are closer than this.
pub const UNSURE_MARGIN: f64 = 0.25;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            epochs: 500,
            batch_size: 16,
            shuffle_seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(
                "learning_rate",
                "must be a positive finite number",
            ));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// The seeds one run derives from a single user-facing seed. The network
/// is initialized with the seed itself; split and shuffle use sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub init: u64,
    pub split: u64,
    pub shuffle: u64,
}

pub const SPLIT_STREAM: u64 = 1;
pub const SHUFFLE_STREAM: u64 = 2;

impl SeedPlan {
    pub fn from_seed(seed: u64) -> Self {
        SeedPlan {
            init: seed,
            split: derive_seed(seed, SPLIT_STREAM),
            shuffle: derive_seed(seed, SHUFFLE_STREAM),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub validation: Dataset,
    pub fraction: f64,
}

/// Stratified split: per class, `round(fraction * count)` examples go to
/// train, clamped to `[1, count - 1]` when the class has at least two.
/// Both partitions keep the original dataset order.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    if ds.is_empty() {
        return Err(Error::Argument("cannot split an empty dataset".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in 0..ds.classes().len() {
        let mut positions = ds.indices_of(class);
        let count = positions.len();
        if count == 0 {
            continue;
        }
        let n_train = if count == 1 {
            1
        } else {
            ((fraction * count as f64).round() as usize).clamp(1, count - 1)
        };
        rng.shuffle(&mut positions);
        train_idx.extend_from_slice(&positions[..n_train]);
        val_idx.extend_from_slice(&positions[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok(SplitDataset {
        train: ds.subset(format!("{}/train", ds.name()), &train_idx),
        validation: ds.subset(format!("{}/validation", ds.name()), &val_idx),
        fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("history serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::load("", format!("malformed JSON: {e}")))?;
        let history: TrainingHistory = crate::network::model_io::parse_with_path(value)?;
        for (i, r) in history.epochs.iter().enumerate() {
            if r.epoch != i + 1 {
                return Err(Error::load(
                    format!("[{i}].epoch"),
                    format!("expected epoch {}, found {}", i + 1, r.epoch),
                ));
            }
        }
        Ok(history)
    }
}

fn check_class_count(net: &Network, ds: &Dataset) -> Result<()> {
    if net.output_units() != ds.classes().len() {
        return Err(Error::config(
            "output_units",
            format!(
                "network has {} outputs but the dataset has {} classes",
                net.output_units(),
                ds.classes().len()
            ),
        ));
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy and accuracy over a whole dataset. Empty sets score zero.
pub fn loss_and_accuracy(net: &Network, ds: &Dataset) -> (f64, f64) {
    if ds.is_empty() {
        return (0.0, 0.0);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for e in ds.examples() {
        let p = net.probabilities(&e.image);
        loss += cross_entropy(&p, e.class_index);
        if argmax(&p) == e.class_index {
            correct += 1;
        }
    }
    let n = ds.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Trains `net` in place. Each epoch reshuffles the training set, steps
/// once per batch with the batch-mean gradient, then records metrics on
/// the full train and validation sets and calls `observer`.
pub fn train(
    net: &mut Network,
    split: &SplitDataset,
    hp: &Hyperparams,
    mut observer: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<TrainingHistory> {
    hp.validate()?;
    check_class_count(net, &split.train)?;
    check_class_count(net, &split.validation)?;
    if split.train.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }

    let mut rng = SeededRng::new(hp.shuffle_seed);
    let examples = split.train.examples();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = TrainingHistory::default();

    for epoch in 1..=hp.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(hp.batch_size) {
            let mut total = Gradients::zeros_like(net);
            for &i in batch {
                let (_, g) = net.backward(&examples[i].image, examples[i].class_index)?;
                total.accumulate(&g);
            }
            total.scale(1.0 / batch.len() as f64);
            net.apply_gradients(&total, hp.learning_rate);
        }

        let (train_loss, train_acc) = loss_and_accuracy(net, &split.train);
        let (val_loss, val_acc) = loss_and_accuracy(net, &split.validation);
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        };
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Numeric(format!("loss diverged at epoch {epoch}")));
        }
        history.epochs.push(record);
        if let Some(obs) = observer.as_mut() {
            obs(&record);
        }
    }
    Ok(history)
}

/// Everything one split-init-train pipeline produces.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub network: Network,
    pub split: SplitDataset,
    pub history: TrainingHistory,
    pub train_eval: EvalReport,
    pub validation_eval: EvalReport,
}

/// Splits `ds`, builds a network from `config`, trains it and evaluates both partitions.
pub fn fit(
    ds: &Dataset,
    config: NetworkConfig,
    fraction: f64,
    split_seed: u64,
    hp: &Hyperparams,
    observer: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<FitOutcome> {
    let split = split(ds, fraction, split_seed)?;
    let mut network = Network::new(config)?;
    let history = train(&mut network, &split, hp, observer)?;
    let train_eval = evaluate(&network, &split.train)?;
    let validation_eval = evaluate(&network, &split.validation)?;
    Ok(FitOutcome {
        network,
        split,
        history,
        train_eval,
        validation_eval,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Confident,
    Unsure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub class_name: String,
    pub probabilities: Vec<f64>,
    pub status: Confidence,
}

impl Prediction {
    pub fn from_probabilities(probabilities: Vec<f64>, class_names: &[String]) -> Result<Self> {
        if probabilities.len() != class_names.len() {
            return Err(Error::Argument(format!(
                "{} class names for {} outputs",
                class_names.len(),
                probabilities.len()
            )));
        }
        let top = argmax(&probabilities);
        let runner_up = probabilities
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != top)
            .map(|(_, &p)| p)
            .fold(f64::NEG_INFINITY, f64::max);
        let status = if probabilities[top] - runner_up < UNSURE_MARGIN {
            Confidence::Unsure
        } else {
            Confidence::Confident
        };
        Ok(Prediction {
            class_index: top,
            class_name: class_names[top].clone(),
            probabilities,
            status,
        })
    }

    pub fn probability(&self) -> f64 {
        self.probabilities[self.class_index]
    }
}

pub fn predict(net: &Network, image: &PixelGrid, class_names: &[String]) -> Result<Prediction> {
    if class_names.len() != net.output_units() {
        return Err(Error::Argument(format!(
            "{} class names for a network with {} outputs",
            class_names.len(),
            net.output_units()
        )));
    }
    Prediction::from_probabilities(net.probabilities(image), class_names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_recall: Vec<f64>,
}

impl EvalReport {
    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (truth, predicted) in pairs {
            confusion[truth][predicted] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..classes).map(|i| confusion[i][i]).sum();
        let per_class_recall = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    row[i] as f64 / n as f64
                }
            })
            .collect();
        EvalReport {
            accuracy: if total == 0 {
                0.0
            } else {
                trace as f64 / total as f64
            },
            confusion,
            per_class_recall,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(net: &Network, ds: &Dataset) -> Result<EvalReport> {
    check_class_count(net, ds).map_err(|e| Error::Argument(e.to_string()))?;
    Ok(EvalReport::from_pairs(
        ds.classes().len(),
        ds.examples()
            .iter()
            .map(|e| (e.class_index, argmax(&net.probabilities(&e.image)))),
    ))
}
