//! Euclidean projection onto `{‖x‖₁ ≤ s1} ∩ {‖x‖_G ≤ s2}` and its building
//! blocks.
//!
//! When both constraints are active the projection is the sparse group
//! lasso shrinkage of `v` at multipliers `(λ, η)`: soft-threshold every
//! coordinate by `λ`, then shrink each group block's norm by `η`. For a fixed
//! `λ` the group multiplier solves a simplex-type threshold equation over the
//! thresholded group norms, and the L1 norm of the resulting point is
//! non-increasing in `λ`, so `λ` is found by bisection.

mod dual;
mod simplex;

use crate::error::{check_len, Result, SgfsError};
use crate::model::{group_norm, l1_norm, GroupPartition, ProjectionOutcome, SolverConfig};

use dual::{Layout, SglpSolver};
use simplex::threshold_for_mass;

/// Multipliers of the L1 and group-norm constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPair {
    pub lambda: f64,
    pub eta: f64,
}

impl DualPair {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        check_non_negative("lambda", lambda)?;
        check_non_negative("eta", eta)?;
        Ok(Self { lambda, eta })
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SgfsError::InvalidParameter {
            name,
            reason: format!("must be non-negative and finite, got {value}"),
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SgfsError::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

#[inline]
pub(crate) fn shrink(value: f64, lambda: f64) -> f64 {
    let magnitude = value.abs() - lambda;
    if magnitude > 0.0 {
        magnitude.copysign(value)
    } else {
        0.0
    }
}

/// Elementwise `sign(v_j)·max(|v_j| − λ, 0)`.
pub fn soft_threshold(v: &[f64], lambda: f64) -> Vec<f64> {
    v.iter().map(|&value| shrink(value, lambda)).collect()
}

/// Projection onto the L1 ball of radius `s1`, in linear time.
pub fn l1_ball_projection(v: &[f64], s1: f64) -> Result<Vec<f64>> {
    check_positive("s1", s1)?;
    Ok(l1_projection_unchecked(v, s1).0)
}

/// Returns the projection and the threshold used (0 when `v` is inside).
pub(crate) fn l1_projection_unchecked(v: &[f64], s1: f64) -> (Vec<f64>, f64) {
    if l1_norm(v) <= s1 {
        return (v.to_vec(), 0.0);
    }
    let mut magnitudes: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let theta = threshold_for_mass(&mut magnitudes, s1);
    (soft_threshold(v, theta), theta)
}

/// Projection onto `{‖x‖_G ≤ s2}`: project the vector of group norms onto
/// the L1 ball of radius `s2` and rescale every block accordingly.
pub fn group_ball_projection(v: &[f64], s2: f64, partition: &GroupPartition) -> Result<Vec<f64>> {
    check_positive("s2", s2)?;
    check_len(partition.p(), v.len(), "group_ball_projection: length of v")?;
    Ok(group_projection_unchecked(v, s2, partition).0)
}

pub(crate) fn group_projection_unchecked(v: &[f64], s2: f64, partition: &GroupPartition) -> (Vec<f64>, f64) {
    let norms = partition.block_norms(v);
    let mut work = norms.clone();
    let theta = threshold_for_mass(&mut work, s2);
    if theta == 0.0 {
        return (v.to_vec(), 0.0);
    }
    let mut x = vec![0.0; v.len()];
    for (members, &norm) in partition.groups().iter().zip(&norms) {
        if norm > theta {
            let scale = (norm - theta) / norm;
            for &j in members {
                x[j] = v[j] * scale;
            }
        }
    }
    (x, theta)
}

/// Group multiplier `η` solving `Σ_i max(‖v^λ_{G_i}‖₂ − η, 0) = s2`, or
/// `None` when the thresholded group norms sum to less than `s2`.
pub fn eta_from_lambda(v: &[f64], lambda: f64, s2: f64, partition: &GroupPartition) -> Result<Option<f64>> {
    check_non_negative("lambda", lambda)?;
    check_positive("s2", s2)?;
    check_len(partition.p(), v.len(), "eta_from_lambda: length of v")?;
    let mut norms = partition.block_norms(&soft_threshold(v, lambda));
    if norms.iter().sum::<f64>() < s2 {
        return Ok(None);
    }
    Ok(Some(threshold_for_mass(&mut norms, s2)))
}

/// `‖x(λ, η)‖₁` evaluated group by group from the thresholded blocks. Groups
/// whose thresholded block vanishes contribute zero.
pub fn s1_of_lambda(v: &[f64], lambda: f64, eta: f64, partition: &GroupPartition) -> Result<f64> {
    check_non_negative("lambda", lambda)?;
    check_non_negative("eta", eta)?;
    check_len(partition.p(), v.len(), "s1_of_lambda: length of v")?;
    let mut total = 0.0;
    for members in partition.groups() {
        let (sq, l1) = members.iter().fold((0.0, 0.0), |(sq, l1), &j| {
            let t = (v[j].abs() - lambda).max(0.0);
            (sq + t * t, l1 + t)
        });
        let norm = sq.sqrt();
        if norm > eta {
            total += (norm - eta) * l1 / norm;
        }
    }
    Ok(total)
}

/// Minimizer of `½‖x − v‖² + λ‖x‖₁ + η‖x‖_G`: soft-threshold by `λ`, then
/// shrink each block's norm by `η`.
pub fn compute_x_from_duals(v: &[f64], duals: DualPair, partition: &GroupPartition) -> Result<Vec<f64>> {
    check_len(partition.p(), v.len(), "compute_x_from_duals: length of v")?;
    let mut x = soft_threshold(v, duals.lambda);
    for members in partition.groups() {
        shrink_block(&mut x, members, duals.eta);
    }
    Ok(x)
}

pub(crate) fn shrink_block(x: &mut [f64], members: &[usize], eta: f64) {
    let norm = members.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
    let scale = if norm > eta { (norm - eta) / norm } else { 0.0 };
    for &j in members {
        x[j] *= scale;
    }
}

/// Exact projection of `v` onto `{‖x‖₁ ≤ s1} ∩ {‖x‖_G ≤ s2}`.
pub fn sglp(v: &[f64], s1: f64, s2: f64, partition: &GroupPartition, cfg: &SolverConfig) -> Result<ProjectionOutcome> {
    check_positive("s1", s1)?;
    check_positive("s2", s2)?;
    check_len(partition.p(), v.len(), "sglp: length of v")?;
    let layout = Layout::full(partition);
    SglpSolver::new(v, s1, s2, partition, &layout, cfg).solve()
}

/// Projection with the L1 constraint restricted to the features in `t1`
/// and the group constraint restricted to the groups making up `t3`.
///
/// Features outside `t1` are copied from `v` unchanged, features in
/// `t1 \ t3` are soft-thresholded and the groups of `t3` receive the full
/// sparse-group shrinkage. `t3` must be a subset of `t1` and a union of
/// whole groups. Zero radii are accepted and pin the constrained
/// coordinates to zero, which the DC linearization produces whenever a
/// budget is exactly used up.
pub fn restricted_sglp(
    v: &[f64],
    s1: f64,
    s2: f64,
    t1: &[usize],
    t3: &[usize],
    partition: &GroupPartition,
    cfg: &SolverConfig,
) -> Result<ProjectionOutcome> {
    check_non_negative("s1", s1)?;
    check_non_negative("s2", s2)?;
    check_len(partition.p(), v.len(), "restricted_sglp: length of v")?;
    let layout = Layout::restricted(partition, t1, t3)?;
    SglpSolver::new(v, s1, s2, partition, &layout, cfg).solve()
}

/// Residuals of the two dual equations at `(λ, η)` for the restricted
/// problem: `(ŝ1 − s1, Σ_{T2} max(‖v^λ_{G_i}‖ − η, 0) − s2)`. With full
/// supports these are the residuals of the unrestricted equations.
pub fn restricted_dual_residuals(
    v: &[f64],
    duals: DualPair,
    s1: f64,
    s2: f64,
    t1: &[usize],
    t3: &[usize],
    partition: &GroupPartition,
) -> Result<(f64, f64)> {
    check_len(partition.p(), v.len(), "restricted_dual_residuals: length of v")?;
    let layout = Layout::restricted(partition, t1, t3)?;
    let (l1, group_mass) = dual::evaluate_duals(v, partition, &layout, duals.lambda, duals.eta);
    Ok((l1 - s1, group_mass - s2))
}

/// `(‖x^{T1}‖₁, ‖x^{T3}‖_G)`.
pub fn restricted_norms(x: &[f64], t1: &[usize], t3: &[usize], partition: &GroupPartition) -> Result<(f64, f64)> {
    check_len(partition.p(), x.len(), "restricted_norms: length of x")?;
    let layout = Layout::restricted(partition, t1, t3)?;
    Ok(layout.norms(x, partition))
}

/// `(‖x‖₁, ‖x‖_G)`.
pub fn constraint_norms(x: &[f64], partition: &GroupPartition) -> Result<(f64, f64)> {
    Ok((l1_norm(x), group_norm(x, partition)?))
}

#[cfg(test)]
mod tests;
