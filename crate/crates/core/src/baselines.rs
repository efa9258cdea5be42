//! Reference projections onto `{‖x‖₁ ≤ s1} ∩ {‖x‖_G ≤ s2}` by ADMM and by
//! Dykstra's alternating projections. Both only ever call the two
//! single-constraint projections, so they are independent of the dual
//! bisection in [`crate::projection::sglp`].

use crate::error::{check_len, Result, SgfsError};
use crate::model::{group_norm, l1_norm, GroupPartition};
use crate::projection::{group_projection_unchecked, l1_projection_unchecked};

/// When an iterative projection stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCriterion {
    /// `|f(x_{k−1}) − f(x_k)| ≤ rel_tol · f(x_{k−1})`.
    Relative(f64),
    /// `|f(x_k) − target| ≤ gap` with both constraints violated by at most
    /// `gap`. The violation guard keeps an infeasible iterate whose
    /// objective happens to sit near the target from stopping the run.
    Target { objective: f64, gap: f64 },
    /// `‖x_k − x_{k−1}‖₂ ≤ tol · (1 + ‖x_k‖₂)` together with the same bound
    /// on the auxiliary iterate.
    Stagnation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub criterion: StopCriterion,
    pub max_iter: usize,
}

impl StopRule {
    pub const DEFAULT_MAX_ITER: usize = 100_000;

    pub fn relative(rel_tol: f64) -> Self {
        Self {
            criterion: StopCriterion::Relative(rel_tol),
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn target(objective: f64, gap: f64) -> Self {
        Self {
            criterion: StopCriterion::Target { objective, gap },
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn stagnation(tol: f64) -> Self {
        Self {
            criterion: StopCriterion::Stagnation(tol),
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self::relative(1e-7)
    }
}

#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// Scaled multiplier of `u = x`.
    pub lambda_mult: Vec<f64>,
    /// Scaled multiplier of `w = x`.
    pub eta_mult: Vec<f64>,
    pub rho: f64,
    pub t: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DykstraState {
    pub x: Vec<f64>,
    pub y_aux: Vec<f64>,
    pub p_corr: Vec<f64>,
    pub q_corr: Vec<f64>,
    pub t: usize,
    pub converged: bool,
}

const RHO_MAX: f64 = 65_536.0;

fn validate(v: &[f64], s1: f64, s2: f64, partition: &GroupPartition, stop: &StopRule) -> Result<()> {
    check_len(partition.p(), v.len(), "baseline projection: length of v")?;
    for (name, value) in [("s1", s1), ("s2", s2)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SgfsError::InvalidParameter {
                name,
                reason: format!("must be positive, got {value}"),
            });
        }
    }
    if stop.max_iter == 0 {
        return Err(SgfsError::InvalidParameter {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    (2.0 * half_sq_dist(a, b)).sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct StopCheck<'a> {
    rule: &'a StopRule,
    s1: f64,
    s2: f64,
    partition: &'a GroupPartition,
}

impl StopCheck<'_> {
    /// `prev` is the objective of the previous iterate, `steps` the movement
    /// of the primary and auxiliary iterates.
    fn done(&self, t: usize, x: &[f64], f: f64, prev: f64, steps: (f64, f64)) -> bool {
        match self.rule.criterion {
            StopCriterion::Relative(rel_tol) => t > 1 && (prev - f).abs() <= rel_tol * prev,
            StopCriterion::Target { objective, gap } => {
                if (f - objective).abs() > gap {
                    return false;
                }
                let violation = (l1_norm(x) - self.s1).max(group_norm(x, self.partition).unwrap_or(f64::INFINITY) - self.s2);
                violation <= gap
            }
            StopCriterion::Stagnation(tol) => {
                let scale = 1.0 + norm(x);
                t > 1 && steps.0 <= tol * scale && steps.1 <= tol * scale
            }
        }
    }
}

/// ADMM on the splitting `u = x`, `w = x` with `u` in the L1 ball and `w` in
/// the group-norm ball, in scaled multiplier form.
///
/// The penalty starts at 1 and doubles (up to 2¹⁶) whenever the primal
/// residual exceeds ten times the dual residual; scaled multipliers are
/// rescaled on every change. Hitting `max_iter` returns the last iterate
/// with `converged = false`.
pub fn admm_project(
    v: &[f64],
    s1: f64,
    s2: f64,
    partition: &GroupPartition,
    stop: &StopRule,
) -> Result<(Vec<f64>, AdmmState)> {
    validate(v, s1, s2, partition, stop)?;
    let p = v.len();
    let check = StopCheck {
        rule: stop,
        s1,
        s2,
        partition,
    };
    let mut state = AdmmState {
        x: v.to_vec(),
        u: v.to_vec(),
        w: v.to_vec(),
        lambda_mult: vec![0.0; p],
        eta_mult: vec![0.0; p],
        rho: 1.0,
        t: 0,
        converged: false,
    };
    let mut prev = half_sq_dist(&state.x, v);
    let mut shifted = vec![0.0; p];

    while state.t < stop.max_iter {
        state.t += 1;
        let rho = state.rho;
        let x_prev = std::mem::take(&mut state.x);
        state.x = (0..p)
            .map(|j| (v[j] + rho * (state.u[j] + state.lambda_mult[j] + state.w[j] + state.eta_mult[j])) / (1.0 + 2.0 * rho))
            .collect();

        for ((s, x), m) in shifted.iter_mut().zip(&state.x).zip(&state.eta_mult) {
            *s = x - m;
        }
        let (w, _) = group_projection_unchecked(&shifted, s2, partition);
        for ((s, x), m) in shifted.iter_mut().zip(&state.x).zip(&state.lambda_mult) {
            *s = x - m;
        }
        let (u, _) = l1_projection_unchecked(&shifted, s1);

        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for j in 0..p {
            let du = u[j] - state.x[j];
            let dw = w[j] - state.x[j];
            state.lambda_mult[j] += du;
            state.eta_mult[j] += dw;
            primal_sq += du * du + dw * dw;
            let cu = u[j] - state.u[j];
            let cw = w[j] - state.w[j];
            dual_sq += cu * cu + cw * cw;
        }
        state.u = u;
        state.w = w;

        let f = half_sq_dist(&state.x, v);
        let step = dist(&state.x, &x_prev);
        let aux_step = dual_sq.sqrt();
        if check.done(state.t, &state.x, f, prev, (step, aux_step)) {
            state.converged = true;
            break;
        }
        prev = f;

        let (primal, dual) = (primal_sq.sqrt(), rho * dual_sq.sqrt());
        if primal > 10.0 * dual && rho < RHO_MAX {
            let next = (2.0 * rho).min(RHO_MAX);
            let rescale = rho / next;
            state.lambda_mult.iter_mut().for_each(|m| *m *= rescale);
            state.eta_mult.iter_mut().for_each(|m| *m *= rescale);
            state.rho = next;
        }
    }
    Ok((state.x.clone(), state))
}

/// Dykstra's algorithm alternating the group-norm ball and the L1 ball with
/// correction terms, starting from `x₀ = v` and zero corrections. The
/// returned point is the L1-ball iterate.
pub fn dykstra_project(
    v: &[f64],
    s1: f64,
    s2: f64,
    partition: &GroupPartition,
    stop: &StopRule,
) -> Result<(Vec<f64>, DykstraState)> {
    validate(v, s1, s2, partition, stop)?;
    let p = v.len();
    let check = StopCheck {
        rule: stop,
        s1,
        s2,
        partition,
    };
    let mut state = DykstraState {
        x: v.to_vec(),
        y_aux: v.to_vec(),
        p_corr: vec![0.0; p],
        q_corr: vec![0.0; p],
        t: 0,
        converged: false,
    };
    let mut prev = 0.0;
    let mut work = vec![0.0; p];

    while state.t < stop.max_iter {
        state.t += 1;
        for ((w, x), c) in work.iter_mut().zip(&state.x).zip(&state.p_corr) {
            *w = x + c;
        }
        let (y, _) = group_projection_unchecked(&work, s2, partition);
        for j in 0..p {
            state.p_corr[j] = work[j] - y[j];
            work[j] = y[j] + state.q_corr[j];
        }
        let (x, _) = l1_projection_unchecked(&work, s1);
        for j in 0..p {
            state.q_corr[j] = work[j] - x[j];
        }
        let steps = (dist(&x, &state.x), dist(&y, &state.y_aux));
        state.x = x;
        state.y_aux = y;

        let f = half_sq_dist(&state.x, v);
        if check.done(state.t, &state.x, f, prev, steps) {
            state.converged = true;
            break;
        }
        prev = f;
    }
    Ok((state.x.clone(), state))
}
