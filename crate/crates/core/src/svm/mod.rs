//! Soft-margin RBF support vector classification.

mod kernel;
mod ovo;
mod smo;

pub use kernel::{rbf_kernel, KernelSpec};
pub use ovo::{
    predict_ovo, predict_scores, train_ovo, OvoConfig, OvoModel, PairClassifier, Regime,
    SupportVector, Votes,
};
pub use smo::{
    decision_value, dual_objective, kkt_violations, solve_binary, BinaryProblem, DualSolution,
    SolverConfig,
};
