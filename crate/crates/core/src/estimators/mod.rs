//! Exact and sampling-based Shapley estimators.

mod exact;
mod kernelshap;
mod report;
mod sim;
mod solver;

pub use exact::{exact_report, exact_shapley, exact_shapley_with, shapley_from_table};
pub use kernelshap::{kernel_shap, KernelShap, SINGULAR_JITTER};
pub use report::{EstimatorKind, ExplanationReport, IterationTrace, TraceRecord};
pub use sim::{sim_shapley, stable_sim_shapley, SimShapley};
pub use solver::{solve_constrained_ridge, BatchMoments, ConstrainedRidge};
