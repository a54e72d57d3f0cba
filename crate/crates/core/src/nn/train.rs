use std::time::Instant;

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::mlp::{argmax_rows, loss_for, ForwardCache, Mlp};
use super::scalar::Scalar;
use crate::diffgen::{feature_matrix, DiffSample, FEATURES};
use crate::error::ModelError;
use crate::rng;

/// Training hyper-parameters. Defaults: Adam at lr 0.001, 25 epochs,
/// batches of 100, 30% validation.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    /// Seeds the per-epoch mini-batch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 25,
            batch_size: 100,
            val_fraction: 0.3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.epochs > 0
            && self.batch_size > 0
            && self.val_fraction > 0.0
            && self.val_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::Arch(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub wall_ms: u64,
}

impl TrainReport {
    /// Validation accuracy after the last epoch.
    pub fn final_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.val_accuracy)
    }

    pub fn min_accuracy(&self) -> f64 {
        self.epochs
            .iter()
            .map(|e| e.val_accuracy)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_accuracy(&self) -> f64 {
        self.epochs
            .iter()
            .map(|e| e.val_accuracy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// A dense labelled feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix<T> {
    pub features: Vec<T>,
    pub labels: Vec<usize>,
    pub width: usize,
}

impl<T: Scalar> LabeledMatrix<T> {
    pub fn new(features: Vec<T>, labels: Vec<usize>, width: usize) -> Self {
        assert_eq!(features.len(), labels.len() * width, "feature matrix shape");
        Self {
            features,
            labels,
            width,
        }
    }

    pub fn from_samples(samples: &[DiffSample]) -> Self {
        Self::new(
            feature_matrix(samples),
            samples.iter().map(|s| s.label).collect(),
            FEATURES,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.width..(i + 1) * self.width]
    }
}

const EVAL_CHUNK: usize = 2048;

/// Fraction of rows whose argmax prediction equals the label.
pub fn evaluate_accuracy<T: Scalar>(model: &Mlp<T>, data: &LabeledMatrix<T>) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Empty);
    }
    let mut correct = 0usize;
    let mut cache = ForwardCache::new();
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let rows = end - start;
        model.forward_cached(
            &data.features[start * data.width..end * data.width],
            rows,
            &mut cache,
        );
        let preds = argmax_rows(cache.probabilities(), model.classes());
        correct += preds
            .iter()
            .zip(&data.labels[start..end])
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn evaluate_samples<T: Scalar>(model: &Mlp<T>, samples: &[DiffSample]) -> Result<f64, ModelError> {
    evaluate_accuracy(model, &LabeledMatrix::from_samples(samples))
}

/// Train on `train`, recording validation accuracy on `val` after each epoch.
///
/// Every epoch visits the training rows in a fresh seeded order, in
/// mini-batches of `batch_size` (the last batch may be short), with one Adam
/// step per batch. A non-finite loss or parameter aborts with
/// [`ModelError::NonFinite`].
pub fn train<T: Scalar>(
    mut model: Mlp<T>,
    train: &LabeledMatrix<T>,
    val: &LabeledMatrix<T>,
    config: &TrainConfig,
) -> Result<(Mlp<T>, TrainReport), ModelError> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(ModelError::Empty);
    }
    let width = model.arch().input_dim;
    if train.width != width || val.width != width {
        return Err(ModelError::Arch(format!(
            "data has {} features, model expects {width}",
            train.width
        )));
    }
    let t = model.classes();
    if train.labels.iter().chain(&val.labels).any(|&l| l >= t) {
        return Err(ModelError::Arch(format!("label out of range for {t} classes")));
    }

    let started = Instant::now();
    let mut adam = AdamState::new(&model);
    let mut grads = model.zero_gradients();
    let mut cache = ForwardCache::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut xb: Vec<T> = Vec::with_capacity(config.batch_size * width);
    let mut yb: Vec<T> = Vec::with_capacity(config.batch_size * t);
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            xb.clear();
            yb.clear();
            for &i in batch {
                xb.extend_from_slice(train.row(i));
                let label = train.labels[i];
                yb.extend((0..t).map(|c| if c == label { T::one() } else { T::zero() }));
            }
            model.forward_cached(&xb, batch.len(), &mut cache);
            let loss = loss_for(model.arch().head, cache.probabilities(), &yb, t)
                .to_f64()
                .unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(ModelError::NonFinite { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(cache.probabilities(), t)
                .iter()
                .zip(batch)
                .filter(|(p, &i)| **p == train.labels[i])
                .count();
            model.backward(&xb, &yb, &mut cache, &mut grads);
            adam_step(&mut model, &grads, &mut adam, config.learning_rate);
        }
        if !model.all_finite() {
            return Err(ModelError::NonFinite { epoch });
        }
        epochs.push(EpochStats {
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_accuracy: evaluate_accuracy(&model, val)?,
        });
    }
    let report = TrainReport {
        epochs,
        wall_ms: started.elapsed().as_millis() as u64,
    };
    Ok((model, report))
}
