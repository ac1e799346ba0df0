//! Binary soft-margin SVM solved in the dual.
//!
//! The dual with per-sample box bounds `C_i` (`C+` for positive, `C-` for
//! negative samples) is
//!
//! ```text
//! max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C_i,  sum_i a_i y_i = 0
//! ```
//!
//! It is solved by sequential minimal optimization: each iteration picks the
//! maximal-violating index `i` and, among the candidates for `j`, the one
//! with the largest second-order decrease of the objective, then solves the
//! two-variable subproblem in closed form. Iteration stops once the
//! violation gap `m(a) - M(a)` drops below `tol`.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelCache, KernelSpec};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProblem {
    pub inputs: Vec<Vec<f64>>,
    /// `+1.0` or `-1.0` per input.
    pub labels: Vec<f64>,
    pub c_pos: f64,
    pub c_neg: f64,
}

impl BinaryProblem {
    pub fn bound(&self, i: usize) -> f64 {
        if self.labels[i] > 0.0 {
            self.c_pos
        } else {
            self.c_neg
        }
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.len(),
                found: self.labels.len(),
            });
        }
        for c in [self.c_pos, self.c_neg] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "penalty bounds must be positive, got C+ = {}, C- = {}",
                    self.c_pos, self.c_neg
                )));
            }
        }
        if let Some(y) = self.labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter(format!("binary label must be +1 or -1, got {y}")));
        }
        let n_pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        if n_pos == 0 || n_pos == self.labels.len() {
            return Err(Error::TooFewClasses(usize::from(!self.labels.is_empty())));
        }
        let dim = self.inputs[0].len();
        if let Some(x) = self.inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stopping tolerance on the maximal KKT violation gap.
    pub tol: f64,
    /// Iteration budget, in multiples of the problem size.
    pub max_passes: usize,
    /// Kernel cache budget in megabytes.
    pub cache_mb: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-3,
            max_passes: 10_000,
            cache_mb: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    /// Dual objective at the solution (maximization form).
    pub objective: f64,
    pub iterations: usize,
}

/// Dual objective `sum a - 1/2 a'Qa` evaluated from scratch.
pub fn dual_objective(problem: &BinaryProblem, kernel: &KernelSpec, alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            quad += alphas[i]
                * alphas[j]
                * problem.labels[i]
                * problem.labels[j]
                * kernel.eval_unchecked(&problem.inputs[i], &problem.inputs[j]);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// `f(x) = sum_i a_i y_i K(x_i, x) + b`.
pub fn decision_value(
    solution: &DualSolution,
    inputs: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    x: &[f64],
) -> f64 {
    solution
        .support_indices
        .iter()
        .map(|&i| solution.alphas[i] * labels[i] * kernel.eval_unchecked(&inputs[i], x))
        .sum::<f64>()
        + solution.bias
}

/// Number of samples violating the margin conditions by more than `tol`:
/// `y f(x) >= 1 - tol` at `a = 0`, `y f(x) <= 1 + tol` at `a = C`, and
/// `|y f(x) - 1| <= tol` in between. An equality-constraint residual above
/// `tol` counts as one more violation.
pub fn kkt_violations(
    problem: &BinaryProblem,
    solution: &DualSolution,
    kernel: &KernelSpec,
    tol: f64,
) -> usize {
    let mut count = 0;
    for (i, x) in problem.inputs.iter().enumerate() {
        let margin =
            problem.labels[i] * decision_value(solution, &problem.inputs, &problem.labels, kernel, x);
        let a = solution.alphas[i];
        let ok = if a <= 0.0 {
            margin >= 1.0 - tol
        } else if a >= problem.bound(i) {
            margin <= 1.0 + tol
        } else {
            (margin - 1.0).abs() <= tol
        };
        if !ok {
            count += 1;
        }
    }
    let residual: f64 = solution
        .alphas
        .iter()
        .zip(&problem.labels)
        .map(|(a, y)| a * y)
        .sum();
    if residual.abs() > tol {
        count += 1;
    }
    count
}

struct Solver<'a> {
    y: &'a [f64],
    bound: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    cache: KernelCache<'a>,
}

impl Solver<'_> {
    fn is_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.bound[t]
    }

    fn is_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Indices that may move up along `y`: `y = +1, a < C` or `y = -1, a > 0`.
    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            !self.is_upper(t)
        } else {
            !self.is_lower(t)
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            !self.is_lower(t)
        } else {
            !self.is_upper(t)
        }
    }

    /// Working pair, or `None` once the violation gap is below `tol`.
    fn select(&mut self, tol: f64) -> Option<(usize, usize)> {
        let n = self.y.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let i = i?;
        let row_i = self.cache.row(i);

        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j = None;
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                // Diagonal of an RBF Gram matrix is 1.
                let mut a = 2.0 - 2.0 * row_i[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score <= best {
                    best = score;
                    j = Some(t);
                }
            }
        }
        if gmax - gmin < tol {
            return None;
        }
        j.map(|j| (i, j))
    }

    fn update(&mut self, i: usize, j: usize) {
        let row_i = self.cache.row(i);
        let row_j = self.cache.row(j);
        let (ci, cj) = (self.bound[i], self.bound[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let mut quad = 2.0 - 2.0 * row_i[j];
        if quad <= 0.0 {
            quad = TAU;
        }

        if self.y[i] != self.y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (yi, yj) = (self.y[i], self.y[j]);
        for t in 0..self.y.len() {
            self.grad[t] += self.y[t] * (yi * row_i[t] * di + yj * row_j[t] * dj);
        }
    }

    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            let upper = self.is_upper(t);
            let lower = self.is_lower(t);
            if (upper && self.y[t] < 0.0) || (lower && self.y[t] > 0.0) {
                ub = ub.min(yg);
            } else if upper || lower {
                lb = lb.max(yg);
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }

    fn objective(&self) -> f64 {
        0.5 * self
            .alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a * (1.0 - g))
            .sum::<f64>()
    }

    fn solution(&self, iterations: usize) -> DualSolution {
        DualSolution {
            support_indices: (0..self.alpha.len()).filter(|&t| self.alpha[t] > 0.0).collect(),
            alphas: self.alpha.clone(),
            bias: self.bias(),
            objective: self.objective(),
            iterations,
        }
    }
}

pub fn solve_binary(
    problem: &BinaryProblem,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<DualSolution> {
    problem.validate()?;
    if !(config.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", config.tol)));
    }
    let n = problem.inputs.len();
    let cache_rows = ((config.cache_mb * 1024.0 * 1024.0) / (8.0 * n as f64)) as usize;
    let mut solver = Solver {
        y: &problem.labels,
        bound: (0..n).map(|i| problem.bound(i)).collect(),
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
        cache: KernelCache::new(&problem.inputs, *kernel, cache_rows.min(n)),
    };

    let max_iter = config.max_passes.saturating_mul(n).max(1);
    for iter in 0..max_iter {
        match solver.select(config.tol) {
            Some((i, j)) => solver.update(i, j),
            None => return Ok(solver.solution(iter)),
        }
    }
    let best = solver.solution(max_iter);
    Err(Error::NotConverged {
        iterations: max_iter,
        objective: best.objective,
        violations: kkt_violations(problem, &best, kernel, config.tol),
    })
}
