//! Property checks shared by the property test target and the acceptance
//! run. Each check drives its own `TestRunner`.

#![allow(dead_code)]

use std::collections::BTreeMap;

use bloomcast::data::{
    build_windows, from_day_of_year, to_day_of_year, BloomEvent, DailyRecord, Dataset, WindowConfig, WindowSample,
};
use bloomcast::imbalance::{class_weights, smote_oversample};
use bloomcast::lstm::{forward, LstmHyper, LstmParams};
use bloomcast::metrics::{confusion, macro_prf, pr_curve};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

pub type Check = fn(&mut TestRunner) -> Result<(), String>;

/// `(module, name, check)` for every invariant.
pub const ALL: &[(&str, &str, Check)] = &[
    ("lstm", "probabilities_normalized", lstm_probabilities_normalized),
    ("lstm", "inference_deterministic", lstm_inference_deterministic),
    ("lstm", "gradients_match_finite_differences", lstm_gradients_match_finite_differences),
    ("lstm", "states_finite_over_1000_steps", lstm_states_finite_over_1000_steps),
    ("imbalance", "weights_reweight_to_total", weights_reweight_to_total),
    ("imbalance", "balanced_counts_weigh_one", balanced_counts_weigh_one),
    ("imbalance", "smote_on_neighbor_segments", smote_on_neighbor_segments),
    ("imbalance", "smote_deterministic_and_uniform", smote_deterministic_and_uniform),
    ("metrics", "accuracy_is_trace_over_total", accuracy_is_trace_over_total),
    ("metrics", "macro_f1_between_class_extremes", macro_f1_between_class_extremes),
    ("metrics", "permutation_invariant", metrics_permutation_invariant),
    ("metrics", "pr_top_precision", pr_top_precision),
    ("data", "day_of_year_round_trips", day_of_year_round_trips),
    ("data", "windows_well_formed", windows_well_formed),
];

/// A runner for `cases` cases. Deterministic runners replay the same cases
/// every time.
pub fn runner(cases: u32, deterministic: bool) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    if deterministic {
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    } else {
        TestRunner::new(config)
    }
}

fn outcome<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn small_hyper() -> impl Strategy<Value = LstmHyper> {
    (1usize..=3, 1usize..=3, 1usize..=5, 2usize..=6, 0.0f64..0.8).prop_map(
        |(num_layers, input_size, hidden_size, n_classes, dropout)| LstmHyper {
            num_layers,
            input_size,
            hidden_size,
            n_classes,
            dropout,
            ..Default::default()
        },
    )
}

fn random_net(hyper: &LstmHyper, seed: u64, scale: f64) -> LstmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = LstmParams::zeros(hyper);
    p.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
    p
}

fn random_seq(steps: usize, width: usize, seed: u64, scale: f64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Array2::from_shape_fn((steps, width), |_| rng.random_range(-scale..=scale))
}

pub fn lstm_probabilities_normalized(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (small_hyper(), 1usize..12, any::<u64>(), 0.1f64..5.0, any::<bool>());
    outcome(runner.run(&strategy, |(hyper, steps, seed, scale, train)| {
        let params = random_net(&hyper, seed, scale);
        let seq = random_seq(steps, hyper.input_size, seed, scale);
        let (probs, _) = forward(seq.view(), &params, &hyper, train, seed).unwrap();
        prop_assert!((probs.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        Ok(())
    }))
}

pub fn lstm_inference_deterministic(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (small_hyper(), 1usize..12, any::<u64>(), any::<u64>());
    outcome(runner.run(&strategy, |(hyper, steps, seed, other)| {
        let params = random_net(&hyper, seed, 1.0);
        let seq = random_seq(steps, hyper.input_size, seed, 2.0);
        let a = forward(seq.view(), &params, &hyper, false, seed).unwrap().0;
        let b = forward(seq.view(), &params, &hyper, false, other).unwrap().0;
        prop_assert_eq!(a.to_vec(), b.to_vec());
        Ok(())
    }))
}

pub fn lstm_gradients_match_finite_differences(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (small_hyper(), 1usize..6, any::<u64>(), any::<usize>());
    outcome(runner.run(&strategy, |(hyper, steps, seed, label_pick)| {
        let params = random_net(&hyper, seed, 0.8);
        let seq = random_seq(steps, hyper.input_size, seed, 1.5);
        let label = label_pick % hyper.n_classes;
        let check = super::grad_check::check(seq.view(), &params, &hyper, label, seed);
        prop_assert!(check.max_rel_error < 1e-4, "max relative error {}", check.max_rel_error);
        Ok(())
    }))
}

pub fn lstm_states_finite_over_1000_steps(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (any::<u64>(), 1usize..6, 1usize..3);
    outcome(runner.run(&strategy, |(seed, hidden_size, num_layers)| {
        let hyper = LstmHyper {
            num_layers,
            input_size: 2,
            hidden_size,
            n_classes: 3,
            ..Default::default()
        };
        let params = random_net(&hyper, seed, 1.0);
        let seq = random_seq(1000, 2, seed, 1.0);
        let (probs, _) = forward(seq.view(), &params, &hyper, true, seed).unwrap();
        prop_assert!(probs.iter().all(|p| p.is_finite()));
        Ok(())
    }))
}

fn class_counts() -> impl Strategy<Value = BTreeMap<usize, usize>> {
    prop::collection::btree_map(0usize..11, 1usize..10_000, 1..11)
}

/// Up to 3 classes of 2..8 samples in 1..4 dimensions.
fn point_sets() -> impl Strategy<Value = Dataset> {
    (
        1usize..4,
        prop::collection::vec(2usize..8, 1..4),
        any::<u64>(),
        prop::bool::weighted(0.2),
    )
        .prop_map(|(dim, sizes, seed, coarse)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut samples = Vec::new();
            for (label, &n) in sizes.iter().enumerate() {
                for _ in 0..n {
                    let features = (0..dim)
                        .map(|_| {
                            if coarse {
                                // Repeated coordinates exercise zero-length segments.
                                rng.random_range(0..2) as f64
                            } else {
                                rng.random_range(-10.0..10.0)
                            }
                        })
                        .collect();
                    samples.push(WindowSample {
                        features,
                        label,
                        year: 2000,
                        anchor_doy: 1,
                    });
                }
            }
            Dataset::new(samples, 10, dim).unwrap()
        })
}

fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return p == a;
    }
    let t = p.iter().zip(a).zip(&ab).map(|((p, a), d)| (p - a) * d).sum::<f64>() / len2;
    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
        return false;
    }
    p.iter()
        .zip(a)
        .zip(&ab)
        .all(|((p, a), d)| (p - (a + t * d)).abs() <= 1e-9 * (1.0 + a.abs() + d.abs()))
}

pub fn weights_reweight_to_total(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&class_counts(), |counts| {
        let w = class_weights(&counts).unwrap();
        let n: usize = counts.values().sum();
        let weighted: f64 = counts.iter().map(|(c, &n_j)| w.get(*c) * n_j as f64).sum();
        prop_assert!((weighted - n as f64).abs() <= 1e-12 * n as f64);
        prop_assert!(w.weights.values().all(|&v| v > 0.0));
        Ok(())
    }))
}

pub fn balanced_counts_weigh_one(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&(1usize..11, 1usize..500), |(classes, per)| {
        let counts: BTreeMap<usize, usize> = (0..classes).map(|c| (c, per)).collect();
        let w = class_weights(&counts).unwrap();
        prop_assert!(w.weights.values().all(|&v| v == 1.0));
        Ok(())
    }))
}

pub fn smote_on_neighbor_segments(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&(point_sets(), any::<u64>(), 1usize..6), |(d, seed, k)| {
        let out = smote_oversample(&d, seed, k).unwrap();
        prop_assert_eq!(&out.samples[..d.len()], &d.samples[..]);
        for s in &out.samples[d.len()..] {
            let originals: Vec<&[f64]> = d
                .samples
                .iter()
                .filter(|o| o.label == s.label)
                .map(|o| o.features.as_slice())
                .collect();
            let found = originals.iter().enumerate().any(|(i, a)| {
                originals
                    .iter()
                    .enumerate()
                    .any(|(j, b)| i != j && on_segment(&s.features, a, b))
            });
            prop_assert!(found, "synthetic {:?} of class {} off every segment", s.features, s.label);
        }
        Ok(())
    }))
}

pub fn smote_deterministic_and_uniform(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&(point_sets(), any::<u64>(), 1usize..6), |(d, seed, k)| {
        let a = smote_oversample(&d, seed, k).unwrap();
        let b = smote_oversample(&d, seed, k).unwrap();
        prop_assert_eq!(&a, &b);
        let max = d.class_counts.values().max().copied().unwrap();
        prop_assert!(a.class_counts.values().all(|&c| c == max));
        prop_assert_eq!(a.class_counts.len(), d.class_counts.len());
        Ok(())
    }))
}

fn label_pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..8).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..60)))
}

pub fn accuracy_is_trace_over_total(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&label_pairs(), |(n, pairs)| {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let cm = confusion(&t, &p, n).unwrap();
        prop_assert_eq!(cm.total() as usize, t.len());
        let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count();
        prop_assert_eq!(cm.trace() as usize, hits);
        if !t.is_empty() {
            prop_assert_eq!(cm.accuracy(), 100.0 * cm.trace() as f64 / cm.total() as f64);
        }
        Ok(())
    }))
}

pub fn macro_f1_between_class_extremes(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&label_pairs(), |(n, pairs)| {
        prop_assume!(!pairs.is_empty());
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = macro_prf(&confusion(&t, &p, n).unwrap());
        let f1s: Vec<f64> = m.per_class.iter().filter(|c| c.included).map(|c| c.f1).collect();
        let lo = f1s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
        for c in &m.per_class {
            let expect = if c.precision + c.recall == 0.0 {
                0.0
            } else {
                2.0 * c.precision * c.recall / (c.precision + c.recall)
            };
            prop_assert_eq!(c.f1, expect);
        }
        Ok(())
    }))
}

pub fn metrics_permutation_invariant(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (label_pairs(), prop::collection::vec(0.0f64..1.0, 60), any::<u64>());
    outcome(runner.run(&strategy, |((n, pairs), scores, seed)| {
        prop_assume!(!pairs.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..pairs.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let t2: Vec<usize> = idx.iter().map(|&i| t[i]).collect();
        let p2: Vec<usize> = idx.iter().map(|&i| p[i]).collect();
        let m1 = macro_prf(&confusion(&t, &p, n).unwrap());
        let m2 = macro_prf(&confusion(&t2, &p2, n).unwrap());
        prop_assert_eq!(&m1.per_class, &m2.per_class);
        prop_assert!((m1.f1 - m2.f1).abs() < 1e-12);

        let s: Vec<f64> = scores[..t.len()].to_vec();
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let pos: Vec<bool> = t.iter().map(|&c| c == 0).collect();
        let pos2: Vec<bool> = t2.iter().map(|&c| c == 0).collect();
        match (pr_curve(&s, &pos), pr_curve(&s2, &pos2)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.points.len(), b.points.len());
                prop_assert!((a.auc - b.auc).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one ordering failed"),
        }
        Ok(())
    }))
}

pub fn pr_top_precision(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        prop::collection::hash_set(0u32..1_000_000, 1..40),
        prop::collection::vec(any::<bool>(), 40),
    );
    outcome(runner.run(&strategy, |(scores, flags)| {
        let scores: Vec<f64> = scores.into_iter().map(|v| v as f64 / 1e6).collect();
        let pos: Vec<bool> = flags[..scores.len()].to_vec();
        prop_assume!(pos.iter().any(|&p| p));
        let curve = pr_curve(&scores, &pos).unwrap();
        let top = (0..scores.len())
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        prop_assert_eq!(curve.points[0].precision == 1.0, pos[top]);
        prop_assert!(curve
            .points
            .windows(2)
            .all(|w| w[0].recall <= w[1].recall && w[0].threshold > w[1].threshold));
        prop_assert!((0.0..=1.0).contains(&curve.auc));
        prop_assert_eq!(curve.points.last().unwrap().recall, 1.0);
        Ok(())
    }))
}

pub fn day_of_year_round_trips(runner: &mut TestRunner) -> Result<(), String> {
    outcome(runner.run(&(1600i32..2400, 1u32..=366), |(year, doy)| {
        match from_day_of_year(year, doy) {
            Ok((m, d)) => prop_assert_eq!(to_day_of_year(year, m, d).unwrap(), doy),
            Err(_) => prop_assert_eq!(doy, 366),
        }
        Ok(())
    }))
}

pub fn windows_well_formed(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        20u32..120,
        1usize..15,
        1usize..15,
        prop::collection::btree_set(1u32..150, 0..8),
    );
    outcome(runner.run(&strategy, |(bloom, window_len, k, gaps)| {
        let recs: Vec<DailyRecord> = (1..=150)
            .filter(|d| !gaps.contains(d))
            .map(|d| DailyRecord {
                year: 2003,
                doy: d,
                tmax: None,
                tmin: None,
                tavg: Some((d as f64 * 0.1).sin()),
            })
            .collect();
        let events = [BloomEvent { year: 2003, bloom_doy: bloom }];
        let cfg = WindowConfig {
            window_len,
            k,
            ..Default::default()
        };
        let a = build_windows(&recs, &events, &cfg).unwrap().dataset;
        let b = build_windows(&recs, &events, &cfg).unwrap().dataset;
        prop_assert_eq!(&a, &b);
        for s in &a.samples {
            prop_assert!(s.label <= k);
            prop_assert_eq!(s.features.len(), window_len);
            prop_assert!(s.anchor_doy < bloom);
        }
        for j in 1..=k {
            prop_assert!(a.class_counts.get(&j).copied().unwrap_or(0) <= 1);
        }
        Ok(())
    }))
}
