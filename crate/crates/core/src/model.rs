//! Problem types shared by every solver: the group partition, the
//! least-squares instance, sparsity budgets and the truncated-L1 machinery
//! used by the nonconvex model.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{check_len, Result, SgfsError};

/// Non-overlapping groups covering the feature indices `0..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    /// Builds a partition from explicit index lists. Indices inside each
    /// group are kept in the order given.
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(SgfsError::InvalidPartition("at least one group is required".into()));
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(SgfsError::InvalidPartition(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= p {
                    return Err(SgfsError::InvalidPartition(format!(
                        "feature index {j} in group {g} is out of range for p = {p}"
                    )));
                }
                if group_of[j] != usize::MAX {
                    return Err(SgfsError::InvalidPartition(format!(
                        "feature {j} appears in groups {} and {g}",
                        group_of[j]
                    )));
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(SgfsError::InvalidPartition(format!("feature {j} is not assigned to a group")));
        }
        Ok(Self { groups, group_of })
    }

    /// `count` groups of equal size over contiguous index ranges.
    pub fn contiguous(p: usize, count: usize) -> Result<Self> {
        if count == 0 || !p.is_multiple_of(count) {
            return Err(SgfsError::InvalidPartition(format!(
                "p = {p} is not divisible into {count} equal groups"
            )));
        }
        let size = p / count;
        let groups = (0..count).map(|g| (g * size..(g + 1) * size).collect()).collect();
        Self::new(groups, p)
    }

    /// Builds a partition from one group label per feature. Labels must form
    /// the contiguous range `0..|G|`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let n_groups = labels.iter().max().map_or(0, |&m| m + 1);
        let mut groups = vec![Vec::new(); n_groups];
        for (j, &g) in labels.iter().enumerate() {
            groups[g].push(j);
        }
        if let Some(g) = groups.iter().position(Vec::is_empty) {
            return Err(SgfsError::NonContiguousGroups(format!(
                "group id {g} is unused while ids up to {} appear",
                n_groups - 1
            )));
        }
        Self::new(groups, labels.len())
    }

    pub fn p(&self) -> usize {
        self.group_of.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.group_of[j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.group_of
    }

    /// Euclidean norm of every group block of `x`.
    pub fn block_norms(&self, x: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt())
            .collect()
    }
}

/// Least-squares instance `min ½‖Ax − y‖²` with its feature grouping.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub partition: GroupPartition,
}

impl ProblemInstance {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, partition: GroupPartition) -> Result<Self> {
        check_len(a.nrows(), y.len(), "rows of A vs length of y")?;
        check_len(partition.p(), a.ncols(), "columns of A vs partition size")?;
        Ok(Self { a, y, partition })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// Rows `rows` of this instance, sharing the partition.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            a: self.a.select_rows(rows),
            y: self.y.select_rows(rows),
            partition: self.partition.clone(),
        }
    }

    pub(crate) fn residual(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVectorView::from_slice(x, x.len());
        let mut r = self.y.clone();
        r.gemv(1.0, &self.a, &xv, -1.0);
        r
    }

    /// `Aᵀ(Ax − y)` together with the objective at `x`.
    pub(crate) fn gradient(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let r = self.residual(x);
        let g = self.a.tr_mul(&r);
        (g.as_slice().to_vec(), 0.5 * r.norm_squared())
    }
}

/// Whether a budget counts features/groups or bounds norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetKind {
    Count,
    Radius,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityBudget {
    pub s1: f64,
    pub s2: f64,
    pub kind: BudgetKind,
}

impl SparsityBudget {
    /// Feature/group counts for the nonconvex model. Requires
    /// `1 ≤ s2 ≤ |G|` and `s2 ≤ s1 ≤ p`.
    pub fn count(s1: usize, s2: usize, partition: &GroupPartition) -> Result<Self> {
        if s1 < s2 {
            return Err(SgfsError::InvalidBudget(format!(
                "feature count s1 = {s1} is below group count s2 = {s2}; use count_relaxed to allow it"
            )));
        }
        Self::count_relaxed(s1, s2, partition)
    }

    /// As [`SparsityBudget::count`] without the `s2 ≤ s1` check.
    pub fn count_relaxed(s1: usize, s2: usize, partition: &GroupPartition) -> Result<Self> {
        if s2 == 0 || s2 > partition.num_groups() {
            return Err(SgfsError::InvalidBudget(format!(
                "group count s2 = {s2} must lie in 1..={}",
                partition.num_groups()
            )));
        }
        if s1 == 0 || s1 > partition.p() {
            return Err(SgfsError::InvalidBudget(format!(
                "feature count s1 = {s1} must lie in 1..={}",
                partition.p()
            )));
        }
        Ok(Self {
            s1: s1 as f64,
            s2: s2 as f64,
            kind: BudgetKind::Count,
        })
    }

    /// Norm-ball radii for the convex problem and the projections.
    pub fn radius(s1: f64, s2: f64) -> Result<Self> {
        if !(s1 > 0.0 && s1.is_finite()) || !(s2 > 0.0 && s2.is_finite()) {
            return Err(SgfsError::InvalidBudget(format!(
                "radii must be positive and finite, got s1 = {s1}, s2 = {s2}"
            )));
        }
        Ok(Self {
            s1,
            s2,
            kind: BudgetKind::Radius,
        })
    }

    pub(crate) fn expect_kind(&self, kind: BudgetKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(SgfsError::InvalidBudget(format!(
                "expected a {kind:?} budget, got {:?}",
                self.kind
            )))
        }
    }

    pub(crate) fn s1_count(&self) -> usize {
        self.s1 as usize
    }

    pub(crate) fn s2_count(&self) -> usize {
        self.s2 as usize
    }
}

/// Truncation level τ of `J_τ(z) = min(|z|/τ, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParam(f64);

impl TruncationParam {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Self(tau))
        } else {
            Err(SgfsError::InvalidParameter {
                name: "tau",
                reason: format!("must be positive and finite, got {tau}"),
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Coordinates and groups whose magnitude is at most τ.
///
/// `t1` holds feature indices, `t2` group indices and `t3` the features of
/// the groups in `t2`. All three are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportSets {
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub t3: Vec<usize>,
}

impl SupportSets {
    /// The sets of the zero vector: every feature and group is small.
    pub fn full(partition: &GroupPartition) -> Self {
        Self {
            t1: (0..partition.p()).collect(),
            t2: (0..partition.num_groups()).collect(),
            t3: (0..partition.p()).collect(),
        }
    }
}

/// Result of a projection onto `{‖x‖₁ ≤ s1} ∩ {‖x‖_G ≤ s2}` (or its
/// restricted variant), with the multipliers that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub eta: f64,
    pub c1_active: bool,
    pub c2_active: bool,
    /// Bisection steps taken; zero when a closed-form case applied.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dc_max_iter: usize,
    pub dc_rel_tol: f64,
    pub agm_max_iter: usize,
    pub agm_rel_tol: f64,
    pub bisect_tol: f64,
    pub feas_tol: f64,
    pub initial_lipschitz: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dc_max_iter: 50,
            dc_rel_tol: 1e-5,
            agm_max_iter: 10_000,
            agm_rel_tol: 1e-6,
            bisect_tol: 1e-7,
            feas_tol: 1e-6,
            initial_lipschitz: 1.0,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dc_rel_tol", self.dc_rel_tol),
            ("agm_rel_tol", self.agm_rel_tol),
            ("bisect_tol", self.bisect_tol),
            ("feas_tol", self.feas_tol),
            ("initial_lipschitz", self.initial_lipschitz),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SgfsError::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {value}"),
                });
            }
        }
        for (name, value) in [("dc_max_iter", self.dc_max_iter), ("agm_max_iter", self.agm_max_iter)] {
            if value == 0 {
                return Err(SgfsError::InvalidParameter {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// `½‖Ax − y‖²`.
pub fn objective(inst: &ProblemInstance, x: &[f64]) -> Result<f64> {
    check_len(inst.p(), x.len(), "objective: length of x")?;
    Ok(0.5 * inst.residual(x).norm_squared())
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `‖x‖_G`, the sum of the Euclidean norms of the group blocks.
pub fn group_norm(x: &[f64], partition: &GroupPartition) -> Result<f64> {
    check_len(partition.p(), x.len(), "group_norm: length of x")?;
    Ok(partition.block_norms(x).iter().sum())
}

/// The two truncated-L1 constraint values `(Σ_j J_τ(|x_j|), Σ_i J_τ(‖x_{G_i}‖₂))`.
pub fn truncated_l1_counts(x: &[f64], partition: &GroupPartition, tau: TruncationParam) -> Result<(f64, f64)> {
    check_len(partition.p(), x.len(), "truncated_l1_counts: length of x")?;
    let tau = tau.get();
    let j = |z: f64| (z.abs() / tau).min(1.0);
    let features = x.iter().map(|&v| j(v)).sum();
    let groups = partition.block_norms(x).into_iter().map(j).sum();
    Ok((features, groups))
}

pub fn support_sets(x: &[f64], partition: &GroupPartition, tau: TruncationParam) -> Result<SupportSets> {
    check_len(partition.p(), x.len(), "support_sets: length of x")?;
    let tau = tau.get();
    let t1 = (0..x.len()).filter(|&j| x[j].abs() <= tau).collect();
    let t2: Vec<usize> = partition
        .block_norms(x)
        .iter()
        .enumerate()
        .filter(|(_, &norm)| norm <= tau)
        .map(|(g, _)| g)
        .collect();
    let mut t3: Vec<usize> = t2.iter().flat_map(|&g| partition.group(g).iter().copied()).collect();
    t3.sort_unstable();
    Ok(SupportSets { t1, t2, t3 })
}

/// Largest `p` accepted by [`l0_oracle`].
pub const L0_ORACLE_MAX_P: usize = 20;

/// Exact minimizer of the count-constrained least-squares problem by
/// enumerating every feasible support.
///
/// Supports are visited in lexicographic order of their sorted index lists
/// and a later support only replaces the incumbent when it is strictly
/// better (beyond a relative `1e-12`), so ties go to the smallest support.
/// Rank-deficient supports use the minimum-norm least-squares fit.
pub fn l0_oracle(inst: &ProblemInstance, budget: &SparsityBudget) -> Result<Vec<f64>> {
    budget.expect_kind(BudgetKind::Count)?;
    let p = inst.p();
    if p > L0_ORACLE_MAX_P {
        return Err(SgfsError::SizeLimitExceeded {
            p,
            limit: L0_ORACLE_MAX_P,
        });
    }
    let mut search = L0Search {
        inst,
        max_features: budget.s1_count(),
        max_groups: budget.s2_count(),
        group_use: vec![0; inst.partition.num_groups()],
        groups_used: 0,
        support: Vec::new(),
        best_value: 0.5 * inst.y.norm_squared(),
        best_x: vec![0.0; p],
    };
    search.descend(0);
    Ok(search.best_x)
}

struct L0Search<'a> {
    inst: &'a ProblemInstance,
    max_features: usize,
    max_groups: usize,
    group_use: Vec<usize>,
    groups_used: usize,
    support: Vec<usize>,
    best_value: f64,
    best_x: Vec<f64>,
}

impl L0Search<'_> {
    fn descend(&mut self, start: usize) {
        if self.support.len() == self.max_features {
            return;
        }
        for j in start..self.inst.p() {
            let g = self.inst.partition.group_of(j);
            let opens_group = self.group_use[g] == 0;
            if opens_group && self.groups_used == self.max_groups {
                continue;
            }
            self.support.push(j);
            self.group_use[g] += 1;
            if opens_group {
                self.groups_used += 1;
            }

            self.evaluate();
            self.descend(j + 1);

            self.support.pop();
            self.group_use[g] -= 1;
            if opens_group {
                self.groups_used -= 1;
            }
        }
    }

    fn evaluate(&mut self) {
        let sub = self.inst.a.select_columns(&self.support);
        let Some(coef) = min_norm_least_squares(sub, &self.inst.y) else {
            return;
        };
        let mut x = vec![0.0; self.inst.p()];
        for (&j, &c) in self.support.iter().zip(coef.iter()) {
            x[j] = c;
        }
        let value = 0.5 * self.inst.residual(&x).norm_squared();
        if value < self.best_value - 1e-12 * (1.0 + self.best_value) {
            self.best_value = value;
            self.best_x = x;
        }
    }
}

pub(crate) fn min_norm_least_squares(a: DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = top * 1e-12 * (svd.singular_values.len().max(1) as f64);
    svd.solve(y, eps.max(f64::MIN_POSITIVE)).ok()
}
