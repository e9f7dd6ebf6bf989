//! Mini-batch SGD with a patience-based learning-rate schedule.
//!
//! After every epoch the validation metric is computed. When it has not
//! strictly improved on the best value so far for `patience` consecutive
//! epochs the learning rate is multiplied by `anneal_factor` and the patience
//! counter restarts. Training ends once the learning rate drops below
//! `min_lr` (or `max_epochs` is hit) and the best-scoring parameters are
//! returned. With [`Plateau::TrainingLoss`] the learning rate follows the
//! mean training loss instead, which suits runs without a held-out set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{NeuralError, Result};

/// Signal that decides when the learning rate is annealed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Plateau {
    /// Validation metric, higher is better.
    #[default]
    Metric,
    /// Mean training loss of the epoch, lower is better.
    TrainingLoss,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub anneal_factor: f64,
    pub min_lr: f64,
    pub max_epochs: Option<usize>,
    pub plateau: Plateau,
    /// Seeds the mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            lr: 0.1,
            batch_size: 32,
            patience: 4,
            anneal_factor: 0.5,
            min_lr: 1e-4,
            max_epochs: None,
            plateau: Plateau::Metric,
            seed: 1,
        }
    }
}

/// A model that can be optimised example by example.
pub trait Trainable: Clone {
    type Example;

    fn zero_grad(&mut self);

    /// Adds the gradient of the loss on `example` to the accumulators and returns the loss.
    fn accumulate(&mut self, example: &Self::Example) -> Result<f64>;

    /// Applies `param -= lr * grad / batch_len` to every parameter.
    fn step(&mut self, lr: f64, batch_len: usize);
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub metric: f64,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the best validation metric.
    pub model: M,
    pub best_metric: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

pub fn train<M, E>(
    mut model: M,
    train_set: &[E],
    valid_set: &[E],
    schedule: &TrainSchedule,
    mut metric: impl FnMut(&M, &[E]) -> f64,
) -> Result<TrainOutcome<M>>
where
    M: Trainable<Example = E>,
{
    if train_set.is_empty() {
        return Err(NeuralError::EmptySplit("training"));
    }
    if valid_set.is_empty() {
        return Err(NeuralError::EmptySplit("validation"));
    }
    let batch_size = schedule.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut lr = schedule.lr;
    let mut best: Option<(f64, usize, M)> = None;
    let mut best_loss = f64::INFINITY;
    let mut bad_epochs = 0;
    let mut history = Vec::new();
    let mut epoch = 0;

    while lr >= schedule.min_lr {
        if schedule.max_epochs.is_some_and(|m| epoch >= m) {
            break;
        }
        epoch += 1;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(batch_size) {
            model.zero_grad();
            for &i in batch {
                total += model.accumulate(&train_set[i])?;
            }
            model.step(lr, batch.len());
        }
        let value = metric(&model, valid_set);
        let mean_loss = total / train_set.len() as f64;
        let improved = best.as_ref().is_none_or(|(b, _, _)| value > *b);
        history.push(EpochRecord {
            epoch,
            lr,
            mean_loss,
            metric: value,
            improved,
        });
        if improved {
            best = Some((value, epoch, model.clone()));
        }
        let progress = match schedule.plateau {
            Plateau::Metric => improved,
            Plateau::TrainingLoss => mean_loss < best_loss,
        };
        best_loss = best_loss.min(mean_loss);
        if progress {
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= schedule.patience {
                lr *= schedule.anneal_factor;
                bad_epochs = 0;
            }
        }
    }

    let (best_metric, best_epoch, model) = match best {
        Some(b) => b,
        None => (metric(&model, valid_set), 0, model),
    };
    Ok(TrainOutcome {
        model,
        best_metric,
        best_epoch,
        history,
    })
}
