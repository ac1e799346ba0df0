//! Classification metrics: confusion matrix, macro-averaged
//! precision/recall/F1, and per-class precision-recall curves.
//!
//! Macro averages run over the classes that occur in the truth or in the
//! predictions; a class absent from both carries no information and is left
//! out instead of contributing `0/0`. A present class with an empty
//! denominator (never predicted, or never true) scores 0 on that metric.
//!
//! PR-AUC is the step-interpolated area `sum (R_i - R_{i-1}) * P_i` over the
//! curve points, i.e. average precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// Percentage of correct predictions; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.trace() as f64 / total as f64
        }
    }

    /// CSV with a header row and a leading column of class ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in 0..self.n_classes() {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (c, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{c}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, n_classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is this one.
    pub support: u64,
    /// Number of samples predicted as this class.
    pub predicted: u64,
    /// Whether the class counts toward the macro averages.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn macro_prf(confusion: &ConfusionMatrix) -> MacroScores {
    let per_class: Vec<ClassScores> = (0..confusion.n_classes())
        .map(|c| {
            let tp = confusion.counts[c][c];
            let support = confusion.row_sum(c);
            let predicted = confusion.col_sum(c);
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassScores {
                class: c,
                precision,
                recall,
                f1: harmonic_f1(precision, recall),
                support,
                predicted,
                included: support > 0 || predicted > 0,
            }
        })
        .collect();
    let included: Vec<&ClassScores> = per_class.iter().filter(|s| s.included).collect();
    let mean = |f: fn(&ClassScores) -> f64| {
        if included.is_empty() {
            0.0
        } else {
            included.iter().map(|s| f(s)).sum::<f64>() / included.len() as f64
        }
    };
    MacroScores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        per_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, highest threshold first.
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

impl PrCurve {
    /// `threshold,recall,precision` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,recall,precision\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.recall, p.precision);
        }
        out
    }
}

/// Sweeps every distinct score as a `score >= threshold` cut.
pub fn pr_curve(scores: &[f64], is_positive: &[bool]) -> Result<PrCurve> {
    if scores.len() != is_positive.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: is_positive.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("PR scores"));
    }
    let positives = is_positive.iter().filter(|&&p| p).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            tp += usize::from(is_positive[order[idx]]);
            seen += 1;
            idx += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            recall,
            precision,
        });
    }
    Ok(PrCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCurve {
    pub class: usize,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Percent.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_samples: u64,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr_curves: Option<Vec<ClassCurve>>,
}

/// Per-sample score vectors over `classes`, for PR curves.
pub struct ScoreTable<'a> {
    pub classes: &'a [usize],
    pub rows: &'a [Vec<f64>],
}

/// Builds the full report. With `scores`, a PR curve is added for every
/// scored class that has at least one positive sample.
pub fn evaluate(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
    scores: Option<ScoreTable<'_>>,
) -> Result<EvalReport> {
    let cm = confusion(y_true, y_pred, n_classes)?;
    let prf = macro_prf(&cm);
    let pr_curves = match scores {
        None => None,
        Some(table) => {
            if table.rows.len() != y_true.len() {
                return Err(Error::DimensionMismatch {
                    expected: y_true.len(),
                    found: table.rows.len(),
                });
            }
            let mut curves = Vec::new();
            for (col, &class) in table.classes.iter().enumerate() {
                let s: Vec<f64> = table.rows.iter().map(|r| r[col]).collect();
                let pos: Vec<bool> = y_true.iter().map(|&t| t == class).collect();
                match pr_curve(&s, &pos) {
                    Ok(curve) => curves.push(ClassCurve { class, curve }),
                    Err(Error::NoPositives) => {}
                    Err(e) => return Err(e),
                }
            }
            Some(curves)
        }
    };
    Ok(EvalReport {
        accuracy: cm.accuracy(),
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        n_samples: cm.total(),
        per_class: prf.per_class,
        confusion: cm,
        pr_curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert_eq!(cm.accuracy(), 100.0);

        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);

        let cm = confusion(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(cm.accuracy(), 0.0);

        assert!(confusion(&[0], &[], 2).is_err());
        assert!(matches!(confusion(&[0], &[5], 2), Err(Error::LabelOutOfRange { label: 5, .. })));
    }

    #[test]
    fn macro_examples() {
        let perfect = macro_prf(&confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap());
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));

        let m = macro_prf(&confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap());
        assert_abs_diff_eq!(m.precision, 0.75);
        assert_abs_diff_eq!(m.recall, 0.75);
        assert_abs_diff_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-15);

        let one_sided = macro_prf(&confusion(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap());
        assert_eq!(one_sided.per_class[0].precision, 0.5);
        assert_eq!(one_sided.per_class[1].recall, 0.0);
        assert_eq!(one_sided.per_class[1].precision, 0.0);
    }

    #[test]
    fn absent_classes_excluded_from_macro() {
        let m = macro_prf(&confusion(&[0, 1], &[0, 1], 11).unwrap());
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.per_class.iter().filter(|c| c.included).count(), 2);
    }

    #[test]
    fn pr_examples() {
        let perfect = pr_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(perfect.auc, 1.0);

        let flat = pr_curve(&[0.5; 4], &[true, false, false, false]).unwrap();
        assert_eq!(flat.points, vec![PrPoint { threshold: 0.5, recall: 1.0, precision: 0.25 }]);
        assert_eq!(flat.auc, 0.25);

        let c = pr_curve(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap();
        let expect = [(0.9, 0.5, 1.0), (0.8, 0.5, 0.5), (0.3, 1.0, 2.0 / 3.0)];
        assert_eq!(c.points.len(), 3);
        for (p, (t, r, pr)) in c.points.iter().zip(expect) {
            assert_eq!(p.threshold, t);
            assert_abs_diff_eq!(p.recall, r);
            assert_abs_diff_eq!(p.precision, pr, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(c.auc, 0.8333, epsilon = 1e-4);
        assert_abs_diff_eq!(c.auc, 0.5 + 0.5 * 2.0 / 3.0, epsilon = 1e-15);

        assert!(matches!(pr_curve(&[0.1], &[false]), Err(Error::NoPositives)));
    }

    #[test]
    fn csv_layouts() {
        let cm = confusion(&[0, 1], &[1, 1], 2).unwrap();
        assert_eq!(cm.to_csv(), "true\\pred,0,1\n0,0,1\n1,0,1\n");
        let c = pr_curve(&[0.5, 0.25], &[true, false]).unwrap();
        assert_eq!(c.to_csv(), "threshold,recall,precision\n0.5,1,1\n0.25,1,0.5\n");
    }

    #[test]
    fn report_curves_skip_classes_without_positives() {
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let r = evaluate(
            &[0, 1],
            &[0, 1],
            3,
            Some(ScoreTable { classes: &[0, 1, 2], rows: &rows }),
        )
        .unwrap();
        let curves = r.pr_curves.unwrap();
        assert_eq!(curves.iter().map(|c| c.class).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(r.accuracy, 100.0);
    }
}
