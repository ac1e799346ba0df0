use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::{matvec, matvec_t, step, Gates};
use super::{check_sequence, LayerParams, LstmHyper, LstmParams};
use crate::error::{Error, Result};

const PROB_FLOOR: f64 = 1e-12;

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input fed to each layer at each timestep (after dropout), `[layer][t]`.
    inputs: Vec<Vec<Array1<f64>>>,
    gates: Vec<Vec<Gates>>,
    /// Dropout masks applied to the inputs of layers `1..`, each `T x H`.
    masks: Option<Vec<Array2<f64>>>,
    pub probs: Array1<f64>,
}

impl ForwardCache {
    pub fn masks(&self) -> Option<&[Array2<f64>]> {
        self.masks.as_deref()
    }
}

pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// `-ln p[label]`, with the probability floored at `1e-12`.
pub fn cross_entropy(probs: ArrayView1<'_, f64>, label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        n_classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

fn dropout_masks(hyper: &LstmHyper, steps: usize, seed: u64) -> Vec<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - hyper.dropout;
    let scale = 1.0 / keep;
    (1..hyper.num_layers)
        .map(|_| {
            Array2::from_shape_fn((steps, hyper.hidden_size), |_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Class probabilities for one sequence. In training mode with a nonzero
/// dropout rate, masks are drawn from `seed`; otherwise dropout is the
/// identity and `seed` is ignored.
pub fn forward(
    seq: ArrayView2<'_, f64>,
    params: &LstmParams,
    hyper: &LstmHyper,
    train_mode: bool,
    seed: u64,
) -> Result<(Array1<f64>, ForwardCache)> {
    check_sequence(seq, hyper)?;
    let masks = (train_mode && hyper.dropout > 0.0 && hyper.num_layers > 1)
        .then(|| dropout_masks(hyper, seq.nrows(), seed));
    forward_with_masks(seq, params, masks)
}

/// Forward pass with explicit inter-layer dropout masks (`T x H` each, one
/// per layer above the first), or none.
pub fn forward_with_masks(
    seq: ArrayView2<'_, f64>,
    params: &LstmParams,
    masks: Option<Vec<Array2<f64>>>,
) -> Result<(Array1<f64>, ForwardCache)> {
    let steps = seq.nrows();
    let first = params.layers.first().ok_or(Error::InvalidParameter("no LSTM layers".into()))?;
    if seq.ncols() != first.input_size() {
        return Err(Error::DimensionMismatch {
            expected: first.input_size(),
            found: seq.ncols(),
        });
    }
    if let Some(m) = &masks {
        let ok = m.len() + 1 == params.layers.len()
            && m.iter()
                .zip(&params.layers[1..])
                .all(|(m, l)| m.dim() == (steps, l.input_size()));
        if !ok {
            return Err(Error::InvalidParameter("dropout mask shapes do not match the network".into()));
        }
    }

    let mut inputs: Vec<Vec<Array1<f64>>> = Vec::with_capacity(params.layers.len());
    let mut gates: Vec<Vec<Gates>> = Vec::with_capacity(params.layers.len());
    let mut below: Vec<Array1<f64>> = seq.axis_iter(Axis(0)).map(|r| r.to_owned()).collect();

    for (l, layer) in params.layers.iter().enumerate() {
        if l > 0 {
            if let Some(m) = &masks {
                for (t, x) in below.iter_mut().enumerate() {
                    *x *= &m[l - 1].row(t);
                }
            }
        }
        let hid = layer.hidden_size();
        let mut h = Array1::zeros(hid);
        let mut c = Array1::zeros(hid);
        let mut layer_gates = Vec::with_capacity(steps);
        for x in &below {
            let g = step(x.view(), h.view(), c.view(), layer);
            h = g.h.clone();
            c = g.c.clone();
            layer_gates.push(g);
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LSTM cell state"));
        }
        let outputs = layer_gates.iter().map(|g| g.h.clone()).collect();
        inputs.push(std::mem::replace(&mut below, outputs));
        gates.push(layer_gates);
    }

    let top = below.last().expect("at least one timestep");
    let logits = matvec(&params.head_w, top.view()) + &params.head_b;
    let probs = softmax(logits.view());
    if probs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("class probabilities"));
    }
    let cache = ForwardCache {
        inputs,
        gates,
        masks,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

fn outer_add(target: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    let width = target.ncols();
    match (target.as_slice_mut(), row.as_slice()) {
        (Some(data), Some(row)) if width > 0 => {
            for (t, &c) in data.chunks_exact_mut(width).zip(col) {
                t.iter_mut().zip(row).for_each(|(t, r)| *t += c * r);
            }
        }
        _ => {
            for (mut t, &c) in target.rows_mut().into_iter().zip(col) {
                t.zip_mut_with(row, |t, &r| *t += c * r);
            }
        }
    }
}

/// Gradient of `cross_entropy(forward(..), label)` with respect to every
/// parameter, using the masks recorded in `cache`.
pub fn backward(cache: &ForwardCache, params: &LstmParams, label: usize) -> Result<LstmParams> {
    let mut grads = zeros_like(params);
    backward_into(cache, params, label, &mut grads)?;
    Ok(grads)
}

pub(crate) fn zeros_like(params: &LstmParams) -> LstmParams {
    LstmParams {
        layers: params
            .layers
            .iter()
            .map(|l| LayerParams::zeros(l.input_size(), l.hidden_size()))
            .collect(),
        head_w: Array2::zeros(params.head_w.dim()),
        head_b: Array1::zeros(params.head_b.dim()),
    }
}

/// Adds the gradient for one sequence onto `grads`, which must be shaped
/// like `params`.
pub(crate) fn backward_into(cache: &ForwardCache, params: &LstmParams, label: usize, grads: &mut LstmParams) -> Result<()> {
    let n_classes = cache.probs.len();
    if label >= n_classes {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }

    let top = params.layers.len() - 1;
    let steps = cache.gates[top].len();
    let h_last = &cache.gates[top][steps - 1].h;

    let mut dlogits = cache.probs.clone();
    dlogits[label] -= 1.0;
    outer_add(&mut grads.head_w, &dlogits, h_last);
    grads.head_b += &dlogits;

    // Gradient reaching each timestep's output of the current layer.
    let hid_top = params.layers[top].hidden_size();
    let mut d_out: Vec<Array1<f64>> = vec![Array1::zeros(hid_top); steps];
    d_out[steps - 1] = matvec_t(&params.head_w, dlogits.view());

    for l in (0..=top).rev() {
        let layer = &params.layers[l];
        let g_layer = &mut grads.layers[l];
        let hid = layer.hidden_size();
        let mut dh_next = Array1::zeros(hid);
        let mut dc_next = Array1::zeros(hid);
        let mut d_in: Vec<Array1<f64>> = vec![Array1::zeros(layer.input_size()); steps];

        for t in (0..steps).rev() {
            let g = &cache.gates[l][t];
            let zero = Array1::zeros(hid);
            let (h_prev, c_prev) = if t > 0 {
                (&cache.gates[l][t - 1].h, &cache.gates[l][t - 1].c)
            } else {
                (&zero, &zero)
            };
            let dh = &d_out[t] + &dh_next;
            let d_o = &dh * &g.tanh_c;
            let dc = &dc_next + &(&dh * &g.o * &g.tanh_c.mapv(|v| 1.0 - v * v));

            let mut dz = Array1::zeros(4 * hid);
            dz.slice_mut(s![0..hid])
                .assign(&(&dc * &g.g * &g.i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![hid..2 * hid])
                .assign(&(&dc * c_prev * &g.f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![2 * hid..3 * hid])
                .assign(&(&dc * &g.i * &g.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![3 * hid..])
                .assign(&(&d_o * &g.o.mapv(|v| v * (1.0 - v))));

            outer_add(&mut g_layer.w, &dz, &cache.inputs[l][t]);
            outer_add(&mut g_layer.u, &dz, h_prev);
            g_layer.b += &dz;

            d_in[t] = matvec_t(&layer.w, dz.view());
            dh_next = matvec_t(&layer.u, dz.view());
            dc_next = &dc * &g.f;
        }

        if l > 0 {
            if let Some(masks) = &cache.masks {
                for (t, d) in d_in.iter_mut().enumerate() {
                    *d *= &masks[l - 1].row(t);
                }
            }
            d_out = d_in;
        }
    }
    Ok(())
}
