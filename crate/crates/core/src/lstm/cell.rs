use ndarray::{s, Array1, Array2, ArrayView1};

use super::LayerParams;
use crate::error::{Error, Result};

/// Activations of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `a · x`. The small matrices here are far from the sizes where a general
/// product pays off, so rows are walked directly.
pub(crate) fn matvec(a: &Array2<f64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
    match (a.as_slice(), x.as_slice()) {
        (Some(data), Some(x)) if !x.is_empty() => data
            .chunks_exact(x.len())
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect(),
        _ => a.dot(&x),
    }
}

/// `aᵀ · v`.
pub(crate) fn matvec_t(a: &Array2<f64>, v: ArrayView1<'_, f64>) -> Array1<f64> {
    match (a.as_slice(), v.as_slice()) {
        (Some(data), Some(v)) if a.ncols() > 0 => {
            let mut out = Array1::zeros(a.ncols());
            let acc = out.as_slice_mut().expect("fresh array");
            for (row, &vi) in data.chunks_exact(a.ncols()).zip(v) {
                acc.iter_mut().zip(row).for_each(|(o, w)| *o += w * vi);
            }
            out
        }
        _ => a.t().dot(&v),
    }
}

/// Shapes are assumed checked.
pub(crate) fn step(
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    layer: &LayerParams,
) -> Gates {
    let hid = layer.hidden_size();
    let z = matvec(&layer.w, x) + matvec(&layer.u, h_prev) + &layer.b;
    let i = z.slice(s![0..hid]).mapv(sigmoid);
    let f = z.slice(s![hid..2 * hid]).mapv(sigmoid);
    let g = z.slice(s![2 * hid..3 * hid]).mapv(f64::tanh);
    let o = z.slice(s![3 * hid..]).mapv(sigmoid);
    let c = &f * &c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    Gates {
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step: returns the new `(h, c)`.
pub fn cell_forward(
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    layer: &LayerParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let hid = layer.hidden_size();
    let mismatch = |expected, found| Err(Error::DimensionMismatch { expected, found });
    if layer.w.nrows() != 4 * hid || layer.b.len() != 4 * hid || layer.u.nrows() != 4 * hid {
        return mismatch(4 * hid, layer.w.nrows());
    }
    if x.len() != layer.input_size() {
        return mismatch(layer.input_size(), x.len());
    }
    if h_prev.len() != hid {
        return mismatch(hid, h_prev.len());
    }
    if c_prev.len() != hid {
        return mismatch(hid, c_prev.len());
    }
    let gates = step(x, h_prev, c_prev, layer);
    if gates.h.iter().chain(gates.c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM cell state"));
    }
    Ok((gates.h, gates.c))
}
