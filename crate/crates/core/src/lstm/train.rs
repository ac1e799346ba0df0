use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{backward_into, cross_entropy, forward, zeros_like};
use super::{check_sequence, to_sequence, LstmHyper, LstmParams, Optimizer};
use crate::data::Dataset;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: LstmParams,
    /// Mean training-mode loss of each epoch.
    pub loss_trace: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut LstmParams, grads: &LstmParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}

/// Mini-batch training of a freshly initialized network.
///
/// The seed drives initialization, the per-epoch shuffle, and every dropout
/// mask, so a given `(train, hyper)` always yields the same parameters.
pub fn train_lstm(train: &Dataset, hyper: &LstmHyper) -> Result<TrainOutput> {
    hyper.validate()?;
    if train.n_classes() != hyper.n_classes {
        return Err(Error::InvalidParameter(format!(
            "dataset has {} classes, network has {}",
            train.n_classes(),
            hyper.n_classes
        )));
    }
    hyper.timesteps(train.feature_len)?;
    let sequences: Vec<(Array2<f64>, usize)> = train
        .samples
        .iter()
        .map(|s| Ok((to_sequence(&s.features, hyper.input_size)?, s.label)))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = LstmParams::init(hyper, &mut rng);
    let mut adam = Adam::new(params.param_count());
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut grads = zeros_like(&params);
        for batch in order.chunks(hyper.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &idx in batch {
                let (seq, label) = &sequences[idx];
                let mask_seed: u64 = rng.random();
                let (probs, cache) = forward(seq.view(), &params, hyper, true, mask_seed)
                    .map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
                total += cross_entropy(probs.view(), *label)?;
                backward_into(&cache, &params, *label, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            match hyper.optimizer {
                Optimizer::Adam => adam.step(&mut params, &grads, hyper.learning_rate),
                Optimizer::Sgd => params
                    .iter_mut()
                    .zip(grads.iter())
                    .for_each(|(p, g)| *p -= hyper.learning_rate * g),
            }
        }
        let loss = if sequences.is_empty() { 0.0 } else { total / sequences.len() as f64 };
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutput { params, loss_trace })
}

/// Most probable class; ties go to the lower index.
pub fn predict_lstm(params: &LstmParams, hyper: &LstmHyper, seq: ArrayView2<'_, f64>) -> Result<usize> {
    check_sequence(seq, hyper)?;
    let (probs, _) = forward(seq, params, hyper, false, 0)?;
    Ok(argmax(probs.iter().copied()))
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
