//! One-vs-one multi-class ensemble with pairwise voting.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::smo::{solve_binary, BinaryProblem, SolverConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::imbalance::{class_weights, smote_oversample};
use crate::persist;

/// How class imbalance is handled before the pairwise solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Equal penalties for every class.
    #[default]
    Ordinary,
    /// Penalty of class `j` scaled by `n / (k * n_j)`.
    Weighted,
    /// Minority classes raised to the majority count by SMOTE.
    Oversampled,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Ordinary, Regime::Weighted, Regime::Oversampled];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Ordinary => "ordinary",
            Regime::Weighted => "weighted",
            Regime::Oversampled => "oversampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoConfig {
    pub c: f64,
    pub kernel: KernelSpec,
    pub regime: Regime,
    pub seed: u64,
    pub smote_neighbors: usize,
    pub solver: SolverConfig,
}

impl OvoConfig {
    pub fn new(c: f64, kernel: KernelSpec, regime: Regime) -> Self {
        OvoConfig {
            c,
            kernel,
            regime,
            seed: 0,
            smote_neighbors: 5,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: Vec<f64>,
    pub alpha: f64,
    /// `+1.0` for the pair's first class, `-1.0` for its second.
    pub y: f64,
}

/// Trained binary classifier for classes `pos < neg`. A positive decision
/// value is a vote for `pos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub pos: usize,
    pub neg: usize,
    pub c_pos: f64,
    pub c_neg: f64,
    pub bias: f64,
    pub support: Vec<SupportVector>,
}

impl PairClassifier {
    pub fn decision(&self, kernel: &KernelSpec, x: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|sv| sv.alpha * sv.y * kernel.eval_unchecked(&sv.x, x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    /// Class ids seen in training, ascending.
    pub classes: Vec<usize>,
    pub feature_len: usize,
    pub kernel: KernelSpec,
    pub regime: Regime,
    pub c: f64,
    /// One entry per unordered class pair, in lexicographic order.
    pub pairs: Vec<PairClassifier>,
}

/// Per-pair vote outcome for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Votes {
    pub counts: Vec<usize>,
    /// Sum of `|f|` over the contests each class won.
    pub margins: Vec<f64>,
}

const FORMAT: &str = "bloomcast-ovo-svm";
const VERSION: u32 = 1;

/// Trains one binary SVM per unordered pair of classes present in `dataset`.
pub fn train_ovo(dataset: &Dataset, config: &OvoConfig) -> Result<OvoModel> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", config.c)));
    }
    let classes: Vec<usize> = dataset.class_counts.keys().copied().collect();
    if classes.len() < 2 {
        return Err(Error::TooFewClasses(classes.len()));
    }

    let oversampled;
    let (train, penalty): (&Dataset, BTreeMap<usize, f64>) = match config.regime {
        Regime::Ordinary => (dataset, classes.iter().map(|&c| (c, config.c)).collect()),
        Regime::Weighted => {
            let w = class_weights(&dataset.class_counts)?;
            (dataset, classes.iter().map(|&c| (c, config.c * w.get(c))).collect())
        }
        Regime::Oversampled => {
            oversampled = smote_oversample(dataset, config.seed, config.smote_neighbors)?;
            (&oversampled, classes.iter().map(|&c| (c, config.c)).collect())
        }
    };

    let mut by_class: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    for s in &train.samples {
        by_class.entry(s.label).or_default().push(&s.features);
    }

    let pair_ids: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &m)| classes[a + 1..].iter().map(move |&n| (m, n)))
        .collect();

    let pairs = pair_ids
        .par_iter()
        .map(|&(pos, neg)| {
            let mut inputs = Vec::new();
            let mut labels = Vec::new();
            for (class, y) in [(pos, 1.0), (neg, -1.0)] {
                for x in &by_class[&class] {
                    inputs.push(x.to_vec());
                    labels.push(y);
                }
            }
            let problem = BinaryProblem {
                inputs,
                labels,
                c_pos: penalty[&pos],
                c_neg: penalty[&neg],
            };
            let sol = solve_binary(&problem, &config.kernel, &config.solver).map_err(|e| {
                Error::PairFailed {
                    pos,
                    neg,
                    source: Box::new(e),
                }
            })?;
            let support = sol
                .support_indices
                .iter()
                .map(|&i| SupportVector {
                    x: problem.inputs[i].clone(),
                    alpha: sol.alphas[i],
                    y: problem.labels[i],
                })
                .collect();
            Ok(PairClassifier {
                pos,
                neg,
                c_pos: problem.c_pos,
                c_neg: problem.c_neg,
                bias: sol.bias,
                support,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OvoModel {
        classes,
        feature_len: dataset.feature_len,
        kernel: config.kernel,
        regime: config.regime,
        c: config.c,
        pairs,
    })
}

impl OvoModel {
    fn class_index(&self, class: usize) -> usize {
        self.classes.binary_search(&class).expect("pair class is in the class list")
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_len {
            return Err(Error::DimensionMismatch {
                expected: self.feature_len,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Tallies every pairwise contest for `x`, indexed like `classes`.
    pub fn votes(&self, x: &[f64]) -> Result<Votes> {
        self.check_len(x)?;
        let k = self.classes.len();
        let mut votes = Votes {
            counts: vec![0; k],
            margins: vec![0.0; k],
        };
        for pair in &self.pairs {
            let f = pair.decision(&self.kernel, x);
            let winner = self.class_index(if f > 0.0 { pair.pos } else { pair.neg });
            votes.counts[winner] += 1;
            votes.margins[winner] += f.abs();
        }
        Ok(votes)
    }

    /// Majority-vote class. Ties go to the larger summed winning margin,
    /// then to the lower class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let v = self.votes(x)?;
        let mut best = 0;
        for c in 1..self.classes.len() {
            let more = v.counts[c] > v.counts[best]
                || (v.counts[c] == v.counts[best] && v.margins[c] > v.margins[best]);
            if more {
                best = c;
            }
        }
        Ok(self.classes[best])
    }

    /// Fraction of all pairwise votes won by each class, indexed like
    /// `classes`; sums to 1.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.votes(x)?;
        let total = self.pairs.len() as f64;
        Ok(v.counts.iter().map(|&c| c as f64 / total).collect())
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

pub fn predict_ovo(model: &OvoModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}

pub fn predict_scores(model: &OvoModel, x: &[f64]) -> Result<Vec<f64>> {
    model.scores(x)
}
