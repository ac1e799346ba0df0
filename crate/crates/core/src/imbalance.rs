//! Class-imbalance corrections: proportional penalty weights and SMOTE.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, WindowSample};
use crate::error::{Error, Result};

/// Per-class multipliers for the SVM penalty `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: BTreeMap<usize, f64>,
}

impl ClassWeights {
    /// Weight of `class`, or 1 for a class that was not counted.
    pub fn get(&self, class: usize) -> f64 {
        self.weights.get(&class).copied().unwrap_or(1.0)
    }
}

/// `w_j = n / (k * n_j)` where `n` is the total count and `k` the number of
/// classes present.
pub fn class_weights(class_counts: &BTreeMap<usize, usize>) -> Result<ClassWeights> {
    if let Some((&class, _)) = class_counts.iter().find(|(_, &n)| n == 0) {
        return Err(Error::EmptyClass(class));
    }
    let n: usize = class_counts.values().sum();
    let k = class_counts.len();
    let weights = class_counts
        .iter()
        .map(|(&c, &n_j)| (c, n as f64 / (k as f64 * n_j as f64)))
        .collect();
    Ok(ClassWeights { weights })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the `k` nearest other members of `members[i]`,
/// nearest first; equal distances are ordered by index.
fn nearest_neighbors(points: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (squared_distance(points[i], p), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k);
    order.into_iter().map(|(_, j)| j).collect()
}

/// Raises every class to the majority count with SMOTE synthetics.
///
/// Originals come first in their original order, followed by the synthetics
/// of each class in ascending class order. A synthetic copies the year and
/// anchor day of the sample it was interpolated from.
pub fn smote_oversample(dataset: &Dataset, rng_seed: u64, n_neighbors: usize) -> Result<Dataset> {
    if n_neighbors == 0 {
        return Err(Error::InvalidParameter("n_neighbors must be at least 1".into()));
    }
    let target = dataset.class_counts.values().copied().max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut samples = dataset.samples.clone();

    for (&class, &count) in &dataset.class_counts {
        let needed = target - count;
        if needed == 0 {
            continue;
        }
        if count < 2 {
            return Err(Error::TooFewForSmote { class, count });
        }
        let members: Vec<&WindowSample> = dataset
            .samples
            .iter()
            .filter(|s| s.label == class)
            .collect();
        let points: Vec<&[f64]> = members.iter().map(|s| s.features.as_slice()).collect();
        let k = n_neighbors.min(count - 1);
        let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; count];

        for _ in 0..needed {
            let src = rng.random_range(0..count);
            let nbrs = neighbors[src].get_or_insert_with(|| nearest_neighbors(&points, src, k));
            let nn = nbrs[rng.random_range(0..nbrs.len())];
            let gap: f64 = rng.random();
            let features = points[src]
                .iter()
                .zip(points[nn])
                .map(|(x, y)| x + gap * (y - x))
                .collect();
            samples.push(WindowSample {
                features,
                label: class,
                year: members[src].year,
                anchor_doy: members[src].anchor_doy,
            });
        }
    }
    Dataset::new(samples, dataset.k, dataset.feature_len)
}
