use crate::error::{check_len, Result, SgfsError};
use crate::model::{BudgetKind, ProblemInstance, SolverConfig, SparsityBudget, SupportSets};
use crate::projection::{restricted_sglp, sglp};

/// Iteration state of the accelerated gradient method.
#[derive(Debug, Clone)]
pub struct AgmState {
    pub x_cur: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub alpha_cur: f64,
    pub alpha_prev: f64,
    pub lipschitz: f64,
    pub t: usize,
    /// Objective of the returned point.
    pub objective: f64,
    pub converged: bool,
}

/// Doublings of the Lipschitz estimate tried per step before giving up.
const MAX_DOUBLINGS: usize = 200;

/// Accelerated projected gradient for `min ½‖Ax − y‖²` over the
/// intersection of an L1 ball and a group-norm ball, optionally restricted
/// to support sets.
///
/// Every step projects `u − ∇f(u)/L` (through [`sglp`], or
/// [`restricted_sglp`] when `restriction` is given) and doubles `L` until
/// the quadratic model at `u` majorizes `f` at the new point. `L` carries
/// over between steps. Runs stop once the change in objective drops to
/// `agm_rel_tol` times `max(f, agm_rel_tol·½‖y‖²)`; on hitting `agm_max_iter` the best iterate is
/// returned with `converged = false`.
pub fn agm_solve(
    inst: &ProblemInstance,
    budget: &SparsityBudget,
    restriction: Option<&SupportSets>,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, AgmState)> {
    budget.expect_kind(BudgetKind::Radius)?;
    agm_core(inst, budget.s1, budget.s2, restriction, cfg, warm)
}

/// As [`agm_solve`] but takes raw radii, which may be zero for the
/// restricted subproblems of the DC loop.
pub(crate) fn agm_core(
    inst: &ProblemInstance,
    s1: f64,
    s2: f64,
    restriction: Option<&SupportSets>,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, AgmState)> {
    cfg.validate()?;
    let p = inst.p();
    let project = |z: &[f64]| -> Result<Vec<f64>> {
        let out = match restriction {
            Some(sets) => restricted_sglp(z, s1, s2, &sets.t1, &sets.t3, &inst.partition, cfg)?,
            None => sglp(z, s1, s2, &inst.partition, cfg)?,
        };
        Ok(out.x)
    };

    let start = match warm {
        Some(w) => {
            check_len(p, w.len(), "agm_solve: warm start")?;
            project(w)?
        }
        None => vec![0.0; p],
    };
    let mut f_cur = 0.5 * inst.residual(&start).norm_squared();
    let mut state = AgmState {
        x_prev: start.clone(),
        x_cur: start,
        alpha_cur: 1.0,
        alpha_prev: 0.0,
        lipschitz: cfg.initial_lipschitz,
        t: 0,
        objective: f_cur,
        converged: false,
    };
    let mut best = (state.x_cur.clone(), f_cur);
    // Near-interpolating fits drive f towards zero, where a purely relative
    // test never fires; below this floor the test becomes absolute.
    let floor = (cfg.agm_rel_tol * 0.5 * inst.y.norm_squared()).max(f64::MIN_POSITIVE);

    while state.t < cfg.agm_max_iter {
        state.t += 1;
        let beta = (state.alpha_prev - 1.0) / state.alpha_cur;
        let u: Vec<f64> = state
            .x_cur
            .iter()
            .zip(&state.x_prev)
            .map(|(x, xp)| x + beta * (x - xp))
            .collect();
        let (grad, f_u) = inst.gradient(&u);

        let mut accepted = None;
        for _ in 0..MAX_DOUBLINGS {
            let step = 1.0 / state.lipschitz;
            let z: Vec<f64> = u.iter().zip(&grad).map(|(ui, gi)| ui - step * gi).collect();
            let x_next = project(&z)?;
            let f_next = 0.5 * inst.residual(&x_next).norm_squared();
            let (mut lin, mut sq) = (0.0, 0.0);
            for j in 0..p {
                let d = x_next[j] - u[j];
                lin += grad[j] * d;
                sq += d * d;
            }
            let model = f_u + lin + 0.5 * state.lipschitz * sq;
            if f_next <= model + 1e-12 * (1.0 + f_u.abs()) {
                accepted = Some((x_next, f_next));
                break;
            }
            state.lipschitz *= 2.0;
        }
        let Some((x_next, f_next)) = accepted else {
            return Err(SgfsError::NotConverged {
                method: "agm line search",
                iterations: MAX_DOUBLINGS,
            });
        };

        state.x_prev = std::mem::replace(&mut state.x_cur, x_next);
        let next_alpha = (1.0 + (1.0 + 4.0 * state.alpha_cur * state.alpha_cur).sqrt()) / 2.0;
        state.alpha_prev = state.alpha_cur;
        state.alpha_cur = next_alpha;

        if f_next < best.1 {
            best = (state.x_cur.clone(), f_next);
        }
        let change = (f_cur - f_next).abs();
        f_cur = f_next;
        if change <= cfg.agm_rel_tol * f_cur.max(floor) {
            state.converged = true;
            break;
        }
    }

    state.objective = best.1;
    Ok((best.0, state))
}

/// The convex constrained sparse group lasso `min ½‖Ax − y‖²` subject to
/// `‖x‖₁ ≤ s1`, `‖x‖_G ≤ s2`, solved from zero.
pub fn constrained_sgl_solve(inst: &ProblemInstance, budget: &SparsityBudget, cfg: &SolverConfig) -> Result<Vec<f64>> {
    agm_solve(inst, budget, None, cfg, None).map(|(x, _)| x)
}
