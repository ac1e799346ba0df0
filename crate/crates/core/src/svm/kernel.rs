use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Gaussian RBF kernel `exp(-gamma * |x - x'|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: f64,
}

impl KernelSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(KernelSpec { gamma })
    }

    /// `1 / (feature_len * variance of all feature values)`, falling back to
    /// `1 / feature_len` when the features are constant.
    pub fn scaled_default(dataset: &Dataset) -> Self {
        let values = dataset.samples.iter().flat_map(|s| s.features.iter().copied());
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for v in values {
            n += 1.0;
            let delta = v - mean;
            mean += delta / n;
            m2 += delta * (v - mean);
        }
        let var = if n > 0.0 { m2 / n } else { 0.0 };
        let len = dataset.feature_len.max(1) as f64;
        let gamma = if var > 0.0 { 1.0 / (len * var) } else { 1.0 / len };
        KernelSpec { gamma }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        (-self.gamma * d2).exp()
    }
}

pub fn rbf_kernel(x: &[f64], z: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok(spec.eval_unchecked(x, z))
}

/// Least-recently-used cache of kernel matrix rows.
pub(crate) struct KernelCache<'a> {
    inputs: &'a [Vec<f64>],
    spec: KernelSpec,
    rows: Vec<Option<(Rc<[f64]>, u64)>>,
    resident: usize,
    capacity: usize,
    clock: u64,
}

impl<'a> KernelCache<'a> {
    pub(crate) fn new(inputs: &'a [Vec<f64>], spec: KernelSpec, capacity: usize) -> Self {
        KernelCache {
            inputs,
            spec,
            rows: vec![None; inputs.len()],
            resident: 0,
            capacity: capacity.max(2),
            clock: 0,
        }
    }

    pub(crate) fn row(&mut self, i: usize) -> Rc<[f64]> {
        self.clock += 1;
        if let Some((row, stamp)) = &mut self.rows[i] {
            *stamp = self.clock;
            return Rc::clone(row);
        }
        if self.resident >= self.capacity {
            let victim = self
                .rows
                .iter()
                .enumerate()
                .filter_map(|(j, r)| r.as_ref().map(|(_, s)| (*s, j)))
                .min()
                .map(|(_, j)| j)
                .expect("cache is full");
            self.rows[victim] = None;
            self.resident -= 1;
        }
        let xi = &self.inputs[i];
        let row: Rc<[f64]> = self
            .inputs
            .iter()
            .map(|xj| self.spec.eval_unchecked(xi, xj))
            .collect();
        self.rows[i] = Some((Rc::clone(&row), self.clock));
        self.resident += 1;
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_values() {
        let spec = KernelSpec::new(0.5).unwrap();
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], &spec).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], &spec).unwrap();
        assert_abs_diff_eq!(v, 0.606531, epsilon = 1e-6);
        assert_abs_diff_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
        let tiny = KernelSpec::new(1e-12).unwrap();
        assert_abs_diff_eq!(rbf_kernel(&[0.0, 0.0], &[3.0, -4.0], &tiny).unwrap(), 1.0, epsilon = 1e-10);
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], &spec),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(KernelSpec::new(0.0).is_err());
        assert!(KernelSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn cache_evicts_and_recomputes() {
        let inputs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let spec = KernelSpec::new(0.1).unwrap();
        let mut cache = KernelCache::new(&inputs, spec, 2);
        let r0 = cache.row(0);
        cache.row(1);
        cache.row(2);
        assert_eq!(cache.resident, 2);
        assert!(cache.rows[0].is_none());
        assert_eq!(&*cache.row(0), &*r0);
        assert_eq!(r0[3], (-0.9f64).exp());
    }
}
