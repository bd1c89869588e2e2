use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregator::model::{sigmoid_transform, AggregatorModel, Gradients, INPUT_DIM};
use crate::data::SubScores;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::kendall_tau_b;

/// Minimum number of labelled rows accepted by [`train`].
pub const MIN_TRAIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    /// Adam with the usual moment decay (0.9, 0.999) and epsilon 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub batch_size: usize,
    pub learning_rate: T,
    pub max_epochs: usize,
    /// Epochs without a validation tau-b improvement before stopping.
    pub patience: usize,
    pub validation_fraction: T,
    pub hidden: Vec<usize>,
    pub optimizer: Optimizer,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: T::lit(3e-5),
            max_epochs: 500,
            patience: 20,
            validation_fraction: T::lit(0.1),
            hidden: vec![32, 16],
            optimizer: Optimizer::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("train config: {m}")));
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > T::zero()) {
            return bad("learning_rate must be positive");
        }
        if !(self.validation_fraction > T::zero() && self.validation_fraction < T::one()) {
            return bad("validation_fraction must lie in (0,1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![INPUT_DIM];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub train_mse: f64,
    /// NaN when the model's validation outputs are all tied.
    pub validation_tau_b: f64,
    pub best_epoch: usize,
}

struct AdamState<T> {
    m: Gradients<T>,
    v: Gradients<T>,
    step: i32,
}

fn apply_update<T: Scalar>(
    model: &mut AggregatorModel<T>,
    grad: &Gradients<T>,
    cfg: &TrainConfig<T>,
    adam: &mut AdamState<T>,
) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in model.params_mut().zip(grad.params()) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam => {
            let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-8));
            adam.step += 1;
            let c1 = T::one() - b1.powi(adam.step);
            let c2 = T::one() - b2.powi(adam.step);
            let moments = adam
                .m
                .weights
                .iter_mut()
                .chain(adam.m.biases.iter_mut())
                .flatten()
                .zip(adam.v.weights.iter_mut().chain(adam.v.biases.iter_mut()).flatten());
            for ((p, g), (m, v)) in model.params_mut().zip(grad.params()).zip(moments) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

fn validation_tau<T: Scalar>(model: &AggregatorModel<T>, rows: &[([T; INPUT_DIM], T)]) -> f64 {
    let pairs: Vec<(T, T)> = rows.iter().map(|(x, t)| (model.forward_transformed(x), *t)).collect();
    kendall_tau_b(&pairs).unwrap_or(f64::NAN)
}

/// Fits an aggregator to `(sub-scores, human score)` rows by mini-batch
/// descent on MSE. A seeded shuffle holds out `validation_fraction` of the
/// rows; the snapshot with the highest validation tau-b is returned, and
/// training stops after `patience` epochs without improvement.
pub fn train<T: Scalar>(
    data: &[(SubScores<T>, T)],
    cfg: &TrainConfig<T>,
    seed: u64,
) -> Result<(AggregatorModel<T>, Vec<TrainRecord>)> {
    cfg.validate()?;
    if data.len() < MIN_TRAIN_ROWS {
        return Err(Error::InsufficientData {
            needed: MIN_TRAIN_ROWS,
            found: data.len(),
        });
    }
    if data.iter().any(|(_, t)| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite training target".into()));
    }
    let first = data[0].1;
    if data.iter().all(|(_, t)| *t == first) {
        return Err(Error::Degenerate("degenerate targets: all human scores equal".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (T::from_usize_lossy(data.len()) * cfg.validation_fraction)
        .round()
        .to_usize()
        .unwrap_or(0)
        .clamp(2, data.len() - 1);
    let rows: Vec<([T; INPUT_DIM], T)> = order.iter().map(|&i| (sigmoid_transform(&data[i].0), data[i].1)).collect();
    let (val, mut fit) = {
        let (v, f) = rows.split_at(n_val);
        (v.to_vec(), f.to_vec())
    };
    let vt = val[0].1;
    if val.iter().all(|(_, t)| *t == vt) {
        return Err(Error::Degenerate("degenerate targets: validation split has no rank signal".into()));
    }

    let mut model = AggregatorModel::xavier(&cfg.layer_dims(), seed)?;
    let mut adam = AdamState {
        m: Gradients::zeros_like(&model),
        v: Gradients::zeros_like(&model),
        step: 0,
    };
    let mut best: Option<(f64, usize, AggregatorModel<T>)> = None;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        fit.shuffle(&mut rng);
        let mut loss_sum = T::zero();
        for batch in fit.chunks(cfg.batch_size) {
            let (loss, grad) = model.batch_gradient(batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * T::from_usize_lossy(batch.len());
            apply_update(&mut model, &grad, cfg, &mut adam);
        }
        if model.params_mut().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let train_mse = (loss_sum / T::from_usize_lossy(fit.len())).to_f64_lossy();
        let tau = validation_tau(&model, &val);
        let improved = tau.is_finite() && best.as_ref().is_none_or(|(b, _, _)| tau > *b);
        if improved {
            best = Some((tau, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        log.push(TrainRecord {
            epoch,
            train_mse,
            validation_tau_b: tau,
            best_epoch,
        });
        log::debug!("epoch {epoch}: mse {train_mse:.6} tau_b {tau:.4} (best {best_epoch})");
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let model = best.map_or(model, |(_, _, m)| m);
    Ok((model, log))
}
