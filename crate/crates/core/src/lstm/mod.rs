//! Many-to-one stacked LSTM classifier.
//!
//! A window of `T` timesteps (each `input_size` wide) runs through
//! `num_layers` LSTM layers; the top layer's last hidden state goes through
//! a dense layer and a softmax over the `k + 1` classes. Between stacked
//! layers, training applies inverted dropout with one mask entry per
//! timestep and unit.

mod cell;
mod network;
mod train;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::persist;

pub use cell::{cell_forward, Gates};
pub use network::{backward, cross_entropy, forward, forward_with_masks, softmax, ForwardCache};
pub use train::{predict_lstm, train_lstm, TrainOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmHyper {
    pub num_layers: usize,
    /// Width of one timestep; the sequence length is `feature_len / input_size`.
    pub input_size: usize,
    pub hidden_size: usize,
    /// Drop probability between stacked layers, in `[0, 1)`.
    pub dropout: f64,
    pub n_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for LstmHyper {
    fn default() -> Self {
        LstmHyper {
            num_layers: 2,
            input_size: 1,
            hidden_size: 30,
            dropout: 0.5,
            n_classes: 11,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl LstmHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_layers == 0 || self.input_size == 0 || self.hidden_size == 0 {
            return bad("num_layers, input_size and hidden_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }

    /// Timesteps per sequence for a flat feature vector of length `feature_len`.
    pub fn timesteps(&self, feature_len: usize) -> Result<usize> {
        if feature_len == 0 || feature_len % self.input_size != 0 {
            return Err(Error::InvalidParameter(format!(
                "feature length {feature_len} is not a multiple of input_size {}",
                self.input_size
            )));
        }
        Ok(feature_len / self.input_size)
    }
}

/// Weights of one LSTM layer. Gate blocks of `4 * hidden` rows are ordered
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `4H x input`
    pub w: Array2<f64>,
    /// `4H x H`
    pub u: Array2<f64>,
    /// `4H`
    pub b: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LayerParams {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layers: Vec<LayerParams>,
    /// `n_classes x H`
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(hyper: &LstmHyper) -> Self {
        let h = hyper.hidden_size;
        let layers = (0..hyper.num_layers)
            .map(|l| LayerParams::zeros(if l == 0 { hyper.input_size } else { h }, h))
            .collect();
        LstmParams {
            layers,
            head_w: Array2::zeros((hyper.n_classes, h)),
            head_b: Array1::zeros(hyper.n_classes),
        }
    }

    /// Weights uniform in `±1/sqrt(H)`, biases zero except the forget gate at 1.
    pub fn init<R: Rng>(hyper: &LstmHyper, rng: &mut R) -> Self {
        let mut p = Self::zeros(hyper);
        let h = hyper.hidden_size;
        let bound = 1.0 / (h as f64).sqrt();
        let mut fill = |a: &mut [f64]| a.iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound));
        for layer in &mut p.layers {
            fill(layer.w.as_slice_mut().expect("standard layout"));
            fill(layer.u.as_slice_mut().expect("standard layout"));
            layer.b.slice_mut(ndarray::s![h..2 * h]).fill(1.0);
        }
        fill(p.head_w.as_slice_mut().expect("standard layout"));
        p
    }

    pub fn param_count(&self) -> usize {
        self.iter().count()
    }

    /// Every scalar parameter in a fixed order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.u.iter()).chain(l.b.iter()))
            .chain(self.head_w.iter())
            .chain(self.head_b.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.u.iter_mut()).chain(l.b.iter_mut()))
            .chain(self.head_w.iter_mut())
            .chain(self.head_b.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Checks shapes against `hyper`.
    pub fn check(&self, hyper: &LstmHyper) -> Result<()> {
        let expected = Self::zeros(hyper);
        let mismatch = self.layers.len() != expected.layers.len()
            || self
                .layers
                .iter()
                .zip(&expected.layers)
                .any(|(a, b)| a.w.dim() != b.w.dim() || a.u.dim() != b.u.dim() || a.b.dim() != b.b.dim())
            || self.head_w.dim() != expected.head_w.dim()
            || self.head_b.dim() != expected.head_b.dim();
        if mismatch {
            return Err(Error::InvalidParameter("parameter shapes do not match hyperparameters".into()));
        }
        Ok(())
    }
}

/// Reshapes a flat, timestep-major feature vector into `T x input_size`.
pub fn to_sequence(features: &[f64], input_size: usize) -> Result<Array2<f64>> {
    if input_size == 0 || features.is_empty() || features.len() % input_size != 0 {
        return Err(Error::DimensionMismatch {
            expected: input_size,
            found: features.len(),
        });
    }
    Ok(Array2::from_shape_vec((features.len() / input_size, input_size), features.to_vec())
        .expect("length checked"))
}

/// Affine rescaling of inputs fitted on training features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Mean and standard deviation over every feature value of `dataset`.
    pub fn fit(dataset: &Dataset) -> Self {
        let values: Vec<f64> = dataset.samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        if values.is_empty() {
            return Standardizer { mean: 0.0, scale: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Standardizer {
            mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features.iter().map(|v| (v - self.mean) / self.scale).collect()
    }

    pub fn apply_dataset(&self, dataset: &Dataset) -> Dataset {
        let mut out = dataset.clone();
        for s in &mut out.samples {
            s.features = self.apply(&s.features);
        }
        out
    }
}

/// A trained classifier: hyperparameters, weights and input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub hyper: LstmHyper,
    pub feature_len: usize,
    pub scaler: Standardizer,
    pub params: LstmParams,
}

const FORMAT: &str = "bloomcast-lstm";
const VERSION: u32 = 1;

impl LstmModel {
    /// Standardizes `train`, then trains. Returns the model and the
    /// per-epoch mean training loss.
    pub fn fit(train: &Dataset, hyper: &LstmHyper) -> Result<(Self, Vec<f64>)> {
        let scaler = Standardizer::fit(train);
        let out = train_lstm(&scaler.apply_dataset(train), hyper)?;
        let model = LstmModel {
            hyper: hyper.clone(),
            feature_len: train.feature_len,
            scaler,
            params: out.params,
        };
        Ok((model, out.loss_trace))
    }

    fn sequence(&self, features: &[f64]) -> Result<Array2<f64>> {
        if features.len() != self.feature_len {
            return Err(Error::DimensionMismatch {
                expected: self.feature_len,
                found: features.len(),
            });
        }
        to_sequence(&self.scaler.apply(features), self.hyper.input_size)
    }

    pub fn probabilities(&self, features: &[f64]) -> Result<Array1<f64>> {
        let seq = self.sequence(features)?;
        Ok(forward(seq.view(), &self.params, &self.hyper, false, 0)?.0)
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let seq = self.sequence(features)?;
        predict_lstm(&self.params, &self.hyper, seq.view())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        persist::save(path.as_ref(), FORMAT, VERSION, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        persist::load(path.as_ref(), FORMAT, VERSION)
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_string(FORMAT, VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        persist::from_str(text, FORMAT, VERSION)
    }
}

pub(crate) fn check_sequence(seq: ArrayView2<'_, f64>, hyper: &LstmHyper) -> Result<()> {
    if seq.nrows() == 0 {
        return Err(Error::InvalidParameter("sequence has no timesteps".into()));
    }
    if seq.ncols() != hyper.input_size {
        return Err(Error::DimensionMismatch {
            expected: hyper.input_size,
            found: seq.ncols(),
        });
    }
    Ok(())
}
