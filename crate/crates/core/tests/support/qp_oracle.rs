//! Reference solver for the SVM dual, independent of the SMO code path.
//!
//! Accelerated projected gradient (FISTA) on
//! `min 1/2 a'Qa - sum a  s.t. 0 <= a_i <= C_i, y'a = 0`,
//! with the projection onto the box-constrained hyperplane found by
//! bisection on the equality multiplier.

#![allow(dead_code)]

pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
    (-gamma * d2).exp()
}

fn q_matrix(inputs: &[Vec<f64>], labels: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let n = inputs.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| labels[i] * labels[j] * rbf(&inputs[i], &inputs[j], gamma))
                .collect()
        })
        .collect()
}

/// Dual objective in maximization form.
pub fn objective(inputs: &[Vec<f64>], labels: &[f64], gamma: f64, alpha: &[f64]) -> f64 {
    let q = q_matrix(inputs, labels, gamma);
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * q[i][j] * alpha[j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn project(v: &[f64], labels: &[f64], bounds: &[f64]) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(labels)
            .zip(bounds)
            .map(|((vi, yi), ci)| (vi - lambda * yi).clamp(0.0, *ci))
            .collect()
    };
    let residual = |a: &[f64]| a.iter().zip(labels).map(|(a, y)| a * y).sum::<f64>();
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max)
        + bounds.iter().copied().fold(0.0, f64::max)
        + 1.0;
    let (mut lo, mut hi) = (-span, span);
    // 64 halvings take the bracket below f64 resolution.
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizer of the dual and its objective.
pub fn solve(inputs: &[Vec<f64>], labels: &[f64], bounds: &[f64], gamma: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = inputs.len();
    let q = q_matrix(inputs, labels, gamma);
    // Gershgorin bound on the largest eigenvalue.
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut probe = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * probe[j]).sum::<f64>() - 1.0)
            .collect();
        let moved: Vec<f64> = probe.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let next = project(&moved, labels, bounds);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        probe = next
            .iter()
            .zip(&alpha)
            .map(|(x, x_old)| x + (t - 1.0) / t_next * (x - x_old))
            .collect();
        alpha = next;
        t = t_next;
    }
    let obj = objective(inputs, labels, gamma, &alpha);
    (alpha, obj)
}
