//! Sparse group feature selection.
//!
//! Least-squares regression with two levels of sparsity control: at most
//! `s1` features spread over at most `s2` groups. The nonconvex count model
//! is approximated by truncated-L1 constraints and solved by a DC
//! (difference of convex) outer loop whose convex subproblems are handled by
//! an accelerated gradient method. Every gradient step projects onto the
//! intersection of an L1 ball and a group-norm ball, computed exactly by
//! [`projection::sglp`].
//!
//! Modules:
//! - [`model`]: partitions, instances, budgets, truncated-L1 helpers and a
//!   brute-force oracle for tiny problems.
//! - [`projection`]: the intersection projection and its building blocks.
//! - [`solvers`]: accelerated gradient and the DC loop.
//! - [`baselines`]: ADMM and Dykstra projections used as references.
//! - [`data`]: synthetic generators and CSV ingestion.
//! - [`eval`]: selection metrics and cross-validation.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod projection;
pub mod solvers;

pub use error::{Result, SgfsError};
pub use model::{
    group_norm, l0_oracle, l1_norm, objective, support_sets, truncated_l1_counts, BudgetKind, GroupPartition,
    ProblemInstance, ProjectionOutcome, SolverConfig, SparsityBudget, SupportSets, TruncationParam,
};
pub use projection::{restricted_sglp, sglp, DualPair};
