use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::BatchPass;
use super::{Architecture, NetError, Network};
use crate::synth::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Each batch is cut into this many contiguous shards whose gradients
    /// are summed in order, independent of the thread count.
    pub shards: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            dropout_rate: 0.3,
            seed: 7,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shards: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.epochs > 0
            && (0.0..1.0).contains(&self.dropout_rate)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.shards > 0;
        if ok {
            Ok(())
        } else {
            Err(NetError::Config(format!("{self:?}")))
        }
    }
}

/// Flattened inputs with class indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, input: Vec<f32>, label: usize) {
        self.inputs.push(input);
        self.labels.push(label);
    }

    pub fn views(&self) -> Vec<&[f32]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Running mean over the epoch's batches, dropout active.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation accuracy.
    pub network: Network<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl Adam {
    fn update(&mut self, params: &mut [f32], grads: &[f32], cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = cfg.learning_rate as f32;
        let eps = cfg.epsilon as f32;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

fn sharded_pass(
    net: &Network<f32>,
    batch: &[(&[f32], usize)],
    shards: usize,
    dropout_seed: Option<u64>,
) -> Result<BatchPass<f32>, NetError> {
    let per = batch.len().div_ceil(shards.min(batch.len()));
    let passes = batch
        .par_chunks(per)
        .enumerate()
        .map(|(i, chunk)| net.batch_pass(chunk, i * per, dropout_seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut it = passes.into_iter();
    let mut total = it.next().expect("non-empty batch");
    for p in it {
        total.loss_sum += p.loss_sum;
        total.correct += p.correct;
        for (a, b) in total.grads.iter_mut().zip(&p.grads) {
            *a += *b;
        }
    }
    Ok(total)
}

/// Mean eval-mode loss and accuracy.
fn score(net: &Network<f32>, set: &LabeledSet, cfg: &TrainConfig) -> Result<(f64, f64), NetError> {
    let mut loss = 0.0;
    let mut correct = 0;
    let pairs: Vec<(&[f32], usize)> = set.inputs.iter().map(Vec::as_slice).zip(set.labels.iter().copied()).collect();
    for chunk in pairs.chunks(cfg.batch_size.max(64)) {
        let p = sharded_pass(net, chunk, cfg.shards, None)?;
        loss += p.loss_sum;
        correct += p.correct;
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Mini-batch Adam on softmax cross-entropy, keeping the parameters of the
/// best validation epoch. `on_epoch` sees each epoch's log as it finishes.
pub fn train(
    arch: Architecture,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, NetError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NetError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(NetError::EmptySplit("validation"));
    }
    let mut net = Network::<f32>::new(arch, cfg.dropout_rate, derive_seed(cfg.seed, 0))?;
    let mut adam = Adam { m: vec![0.0; arch.param_count()], v: vec![0.0; arch.param_count()], step: 0 };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));

    let mut best = (f64::NEG_INFINITY, 0, net.clone());
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss, mut correct) = (0.0, 0);
        for (b, ids) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&[f32], usize)> =
                ids.iter().map(|&i| (train_set.inputs[i].as_slice(), train_set.labels[i])).collect();
            let seed = derive_seed(cfg.seed ^ 0x5EED, step);
            let pass = sharded_pass(&net, &batch, cfg.shards, Some(seed)).map_err(|e| match e {
                NetError::Diverged { .. } => NetError::Diverged { epoch, batch: b },
                other => other,
            })?;
            let scale = 1.0 / batch.len() as f32;
            let grads: Vec<f32> = pass.grads.iter().map(|g| g * scale).collect();
            adam.update(net.params_mut(), &grads, cfg);
            loss += pass.loss_sum;
            correct += pass.correct;
            step += 1;
        }
        let (val_loss, val_accuracy) = score(&net, val_set, cfg)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&entry);
        if val_accuracy > best.0 {
            best = (val_accuracy, epoch, net.clone());
        }
        log.push(entry);
    }
    Ok(TrainOutcome { network: best.2, best_epoch: best.1, log })
}

/// Eval-mode accuracy on a set.
pub fn accuracy(net: &Network<f32>, set: &LabeledSet) -> Result<f64, NetError> {
    Ok(score(net, set, &TrainConfig::default())?.1)
}
