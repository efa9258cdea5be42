use crate::error::{check_len, Result, SgfsError};
use crate::model::{
    objective, support_sets, truncated_l1_counts, BudgetKind, ProblemInstance, SolverConfig, SparsityBudget,
    SupportSets, TruncationParam,
};

use super::agm::agm_core;

/// Objective history of a DC run.
#[derive(Debug, Clone, Default)]
pub struct DcTrace {
    /// Objective of the starting point followed by every accepted outer
    /// iterate. Never increases.
    pub objectives: Vec<f64>,
    /// Accepted iterates (starting point first), when requested.
    pub iterates_kept: Option<Vec<Vec<f64>>>,
    pub converged: bool,
}

/// One linearized subproblem: the support sets it was built from and the
/// radii of its restricted constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub sets: SupportSets,
    pub l1_radius: f64,
    pub group_radius: f64,
}

/// Builds the convex subproblem around `x`.
///
/// Features and groups of magnitude above τ keep their full count of one
/// and drop out of the constraints; the rest enter through their L1 and
/// group norms scaled by 1/τ. Folding the 1/τ into the radii gives
/// `τ·(s1 − #large features)` and `τ·(s2 − #large groups)`.
///
/// Magnitudes within a relative `feas_tol` below τ count as large. A
/// projection onto a radius-τ ball lands on τ only up to rounding, and
/// reading that point as small would pin it below τ forever.
pub fn linearize(
    x: &[f64],
    inst: &ProblemInstance,
    budget: &SparsityBudget,
    tau: TruncationParam,
    cfg: &SolverConfig,
) -> Result<Linearization> {
    let cut = TruncationParam::new(tau.get() * (1.0 - cfg.feas_tol))?;
    let sets = support_sets(x, &inst.partition, cut)?;
    let large_features = inst.p() - sets.t1.len();
    let large_groups = inst.partition.num_groups() - sets.t2.len();
    let l1_radius = tau.get() * (budget.s1 - large_features as f64);
    let group_radius = tau.get() * (budget.s2 - large_groups as f64);
    if l1_radius < 0.0 || group_radius < 0.0 {
        return Err(SgfsError::Invariant(format!(
            "linearization around an infeasible point: {large_features} large features for s1 = {}, \
             {large_groups} large groups for s2 = {}",
            budget.s1, budget.s2
        )));
    }
    Ok(Linearization {
        sets,
        l1_radius,
        group_radius,
    })
}

/// DC programming for the truncated-L1 model
/// `min ½‖Ax − y‖²  s.t.  Σ J_τ(|x_j|) ≤ s1,  Σ J_τ(‖x_G‖₂) ≤ s2`.
///
/// Each outer iteration linearizes the concave parts of both constraints at
/// the current point and solves the resulting restricted convex problem by
/// [`super::agm_solve`], warm-started at the current point with a fresh
/// Lipschitz estimate. The loop stops when the objective decrease falls
/// below `dc_rel_tol·(1 + f)`, when a subproblem fails to decrease the
/// objective (that iterate is discarded), or after `dc_max_iter` rounds.
pub fn dc_solve(
    inst: &ProblemInstance,
    budget: &SparsityBudget,
    tau: TruncationParam,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, DcTrace)> {
    dc_run(inst, budget, tau, cfg, init, false)
}

/// [`dc_solve`] recording every accepted iterate in the trace.
pub fn dc_solve_keep_iterates(
    inst: &ProblemInstance,
    budget: &SparsityBudget,
    tau: TruncationParam,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, DcTrace)> {
    dc_run(inst, budget, tau, cfg, init, true)
}

fn dc_run(
    inst: &ProblemInstance,
    budget: &SparsityBudget,
    tau: TruncationParam,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
    keep: bool,
) -> Result<(Vec<f64>, DcTrace)> {
    budget.expect_kind(BudgetKind::Count)?;
    cfg.validate()?;
    let mut x = match init {
        Some(x0) => {
            check_len(inst.p(), x0.len(), "dc_solve: initial point")?;
            let (features, groups) = truncated_l1_counts(x0, &inst.partition, tau)?;
            if features > budget.s1 + cfg.feas_tol || groups > budget.s2 + cfg.feas_tol {
                return Err(SgfsError::InvalidParameter {
                    name: "init",
                    reason: format!(
                        "initial point uses ({features:.4}, {groups:.4}) of the ({}, {}) budget",
                        budget.s1, budget.s2
                    ),
                });
            }
            x0.to_vec()
        }
        None => vec![0.0; inst.p()],
    };

    let mut f = objective(inst, &x)?;
    let mut trace = DcTrace {
        objectives: vec![f],
        iterates_kept: keep.then(|| vec![x.clone()]),
        converged: false,
    };

    for _ in 0..cfg.dc_max_iter {
        let lin = linearize(&x, inst, budget, tau, cfg)?;
        let (next, _) = agm_core(inst, lin.l1_radius, lin.group_radius, Some(&lin.sets), cfg, Some(&x))?;
        let f_next = objective(inst, &next)?;
        if f_next > f {
            trace.converged = true;
            break;
        }
        let decrease = f - f_next;
        x = next;
        f = f_next;
        trace.objectives.push(f);
        if let Some(kept) = trace.iterates_kept.as_mut() {
            kept.push(x.clone());
        }
        if decrease <= cfg.dc_rel_tol * (1.0 + f.abs()) {
            trace.converged = true;
            break;
        }
    }
    Ok((x, trace))
}
