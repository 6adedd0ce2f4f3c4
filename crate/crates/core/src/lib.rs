//! Probabilistic model checking of PCTL formulas on Markov chains with a
//! finite or one-dimensional continuous state space.
//!
//! A [`Model`] couples a stochastic kernel with a grid and named regions.
//! State formulas evaluate to [`SatSet`]s; the until operators reduce to the
//! dynamic-programming recursion `V_{k+1} = L[V_k]` from `V_0 = 1_psi`.
//!
//! ```
//! use pctl::{check, formula::parse, models::{fishery_model, FisheryStrategy}};
//!
//! let model = fishery_model(FisheryStrategy::Stop, 800);
//! let f = parse("P>=0.9[ safe U<=5 target ]").unwrap();
//! let sat = check(&model, &f).unwrap();
//! assert!(sat.contains_cell(799));
//! ```

pub mod checker;
pub mod cli;
pub mod exec;
pub mod formula;
pub mod kernel;
pub mod models;

pub use checker::{
    apply_l, bounded_until, check, check_with, contraction_factor, next_values, simulate_until,
    threshold_set, unbounded_until, CheckError, Evaluation, Evaluator, FixpointReport, McEstimate,
    Model, ModelError, OperatorReport, ReachOperator, SatSet, SolverOptions, Tail, ValueFunction,
};
pub use exec::Execution;
pub use formula::{parse, PathFormula, Relation, StateFormula};
pub use kernel::{
    affine_gaussian_kernel, discretize, finite_kernel, DiscretizedKernel, Grid, Kernel, Region,
};
