//! Selection metrics, sign-classification accuracy and grid-search
//! cross-validation over sparsity budgets.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{gen_synthetic_dataset, Dataset, SyntheticSpec};
use crate::error::{check_len, Result, SgfsError};
use crate::model::{GroupPartition, ProblemInstance, SolverConfig, SparsityBudget, TruncationParam};
use crate::solvers::{constrained_sgl_solve, dc_solve};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub estimation_error: f64,
    pub prediction_error: f64,
    pub group_precision: f64,
    pub group_recall: f64,
    pub n_features: usize,
    pub n_groups: usize,
}

/// Features with `|x_j| > τ` and groups with `‖x_G‖₂ > τ`.
pub fn selected_groups(x: &[f64], partition: &GroupPartition, tau: TruncationParam) -> Vec<bool> {
    partition.block_norms(x).into_iter().map(|n| n > tau.get()).collect()
}

/// Number of selected features and groups of `x` at threshold τ.
pub fn selection_counts(x: &[f64], partition: &GroupPartition, tau: TruncationParam) -> Result<(usize, usize)> {
    check_len(partition.p(), x.len(), "selection_counts")?;
    let features = x.iter().filter(|v| v.abs() > tau.get()).count();
    let groups = selected_groups(x, partition, tau).into_iter().filter(|&s| s).count();
    Ok((features, groups))
}

/// Precision and recall of the selected groups of `xhat` against those of
/// `truth`. An empty selection has precision 0, or 1 if the truth selects
/// nothing either.
pub fn group_precision_recall(
    xhat: &[f64],
    truth: &[f64],
    partition: &GroupPartition,
    tau: TruncationParam,
) -> Result<(f64, f64)> {
    check_len(partition.p(), xhat.len(), "estimate")?;
    check_len(partition.p(), truth.len(), "truth")?;
    let est = selected_groups(xhat, partition, tau);
    let tru = selected_groups(truth, partition, tau);
    let n_est = est.iter().filter(|&&s| s).count();
    let n_tru = tru.iter().filter(|&&s| s).count();
    let hits = est.iter().zip(&tru).filter(|(a, b)| **a && **b).count();
    let precision = match (n_est, n_tru) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => hits as f64 / n_est as f64,
    };
    let recall = if n_tru == 0 { 1.0 } else { hits as f64 / n_tru as f64 };
    Ok((precision, recall))
}

fn squared_error(inst: &ProblemInstance, x: &[f64]) -> f64 {
    2.0 * crate::model::objective(inst, x).expect("length checked by caller")
}

pub fn compute_metrics(xhat: &[f64], dataset: &Dataset, tau: TruncationParam) -> Result<SelectionMetrics> {
    let truth = dataset.truth.as_deref().ok_or_else(|| SgfsError::InvalidParameter {
        name: "dataset",
        reason: "estimation error and group metrics need the true coefficients".into(),
    })?;
    let partition = &dataset.test.partition;
    check_len(partition.p(), xhat.len(), "compute_metrics: estimate")?;
    let (group_precision, group_recall) = group_precision_recall(xhat, truth, partition, tau)?;
    let (n_features, n_groups) = selection_counts(xhat, partition, tau)?;
    Ok(SelectionMetrics {
        estimation_error: xhat.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum(),
        prediction_error: squared_error(&dataset.test, xhat),
        group_precision,
        group_recall,
        n_features,
        n_groups,
    })
}

/// Fraction of rows where `sign(aᵀx̂)` equals the ±1 label. A zero
/// prediction never counts as correct.
pub fn classify_accuracy(xhat: &[f64], inst: &ProblemInstance) -> Result<f64> {
    check_len(inst.p(), xhat.len(), "classify_accuracy")?;
    if let Some(bad) = inst.y.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(SgfsError::InvalidParameter {
            name: "labels",
            reason: format!("expected ±1 labels, found {bad}"),
        });
    }
    if inst.n() == 0 {
        return Ok(0.0);
    }
    let pred = &inst.a * nalgebra::DVector::from_column_slice(xhat);
    let correct = pred.iter().zip(inst.y.iter()).filter(|(p, l)| **p * **l > 0.0).count();
    Ok(correct as f64 / inst.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Folds {
    KFold(usize),
    LeaveOneOut,
}

/// Feature-budget grid, either absolute or as multiples of each `s2`.
#[derive(Debug, Clone, PartialEq)]
pub enum S1Grid {
    Absolute(Vec<f64>),
    MultipleOfS2(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMetric {
    /// Held-out sum of squared residuals; lower is better.
    PredictionError,
    /// Held-out sign accuracy on ±1 labels; higher is better.
    Accuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: Folds,
    pub s2_grid: Vec<f64>,
    pub s1_grid: S1Grid,
    pub metric: CvMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// DC on the truncated-L1 model; grids hold feature/group counts.
    Dc,
    /// Constrained sparse group lasso; grids hold norm radii.
    ConstrainedSgl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRow {
    pub s1: f64,
    pub s2: f64,
    pub fold: usize,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best: SparsityBudget,
    /// Mean held-out score of the chosen budget.
    pub best_score: f64,
    /// One row per (grid point, fold), grid-major.
    pub table: Vec<ScoreRow>,
}

impl CvPlan {
    /// Expands the grids into budgets valid for `method`, ordered by `s2`
    /// then `s1` as given.
    pub fn budgets(&self, method: Method, partition: &GroupPartition) -> Result<Vec<SparsityBudget>> {
        if self.s2_grid.is_empty() {
            return Err(SgfsError::InvalidParameter {
                name: "s2_grid",
                reason: "empty".into(),
            });
        }
        let mut out = Vec::new();
        for &s2 in &self.s2_grid {
            let s1s: Vec<f64> = match &self.s1_grid {
                S1Grid::Absolute(v) => v.clone(),
                S1Grid::MultipleOfS2(m) => m.iter().map(|k| k * s2).collect(),
            };
            if s1s.is_empty() {
                return Err(SgfsError::InvalidParameter {
                    name: "s1_grid",
                    reason: "empty".into(),
                });
            }
            for s1 in s1s {
                out.push(match method {
                    Method::Dc => {
                        let whole = |v: f64, name| {
                            if v.fract() == 0.0 && v >= 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(SgfsError::InvalidBudget(format!("{name} = {v} is not a whole count")))
                            }
                        };
                        SparsityBudget::count_relaxed(whole(s1, "s1")?, whole(s2, "s2")?, partition)?
                    }
                    Method::ConstrainedSgl => SparsityBudget::radius(s1, s2)?,
                });
            }
        }
        Ok(out)
    }
}

/// Contiguous folds over `n` rows; the first `n % k` folds get one extra row.
pub fn fold_indices(n: usize, folds: Folds) -> Result<Vec<Vec<usize>>> {
    let k = match folds {
        Folds::KFold(k) => k,
        Folds::LeaveOneOut => n,
    };
    if k < 2 || k > n {
        return Err(SgfsError::InvalidParameter {
            name: "folds",
            reason: format!("{k} folds for {n} samples"),
        });
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let fold = (start..start + len).collect();
            start += len;
            fold
        })
        .collect())
}

/// Fits `method` on `inst` with `budget`.
pub fn fit(
    inst: &ProblemInstance,
    method: Method,
    budget: &SparsityBudget,
    tau: TruncationParam,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    match method {
        Method::Dc => dc_solve(inst, budget, tau, cfg, None).map(|(x, _)| x),
        Method::ConstrainedSgl => constrained_sgl_solve(inst, budget, cfg),
    }
}

fn held_out_score(inst: &ProblemInstance, x: &[f64], metric: CvMetric) -> Result<f64> {
    match metric {
        CvMetric::PredictionError => Ok(squared_error(inst, x)),
        CvMetric::Accuracy => classify_accuracy(x, inst),
    }
}

/// Grid search on the training half of `dataset`. Every (budget, fold)
/// pair is fitted independently in parallel; the table is assembled in
/// grid order. Ties in the fold-averaged score go to the earlier grid
/// point after sorting by `s2` then `s1`.
pub fn cross_validate(
    dataset: &Dataset,
    plan: &CvPlan,
    method: Method,
    tau: TruncationParam,
    cfg: &SolverConfig,
) -> Result<CvResult> {
    let train = &dataset.train;
    let mut budgets = plan.budgets(method, &train.partition)?;
    budgets.sort_by(|a, b| a.s2.total_cmp(&b.s2).then(a.s1.total_cmp(&b.s1)));
    let folds = fold_indices(train.n(), plan.folds)?;
    let splits: Vec<(ProblemInstance, ProblemInstance)> = folds
        .iter()
        .map(|held| {
            let kept: Vec<usize> = (0..train.n()).filter(|i| !held.contains(i)).collect();
            (train.select_rows(&kept), train.select_rows(held))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..budgets.len())
        .flat_map(|b| (0..folds.len()).map(move |f| (b, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, f)| {
            let (fit_on, score_on) = &splits[f];
            let x = fit(fit_on, method, &budgets[b], tau, cfg)?;
            held_out_score(score_on, &x, plan.metric)
        })
        .collect::<Result<_>>()?;

    let table: Vec<ScoreRow> = jobs
        .iter()
        .zip(&scores)
        .map(|(&(b, fold), &score)| ScoreRow {
            s1: budgets[b].s1,
            s2: budgets[b].s2,
            fold,
            score,
        })
        .collect();

    let k = folds.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for (b, chunk) in scores.chunks(folds.len()).enumerate() {
        let mean = chunk.iter().sum::<f64>() / k;
        let better = match (best, plan.metric) {
            (None, _) => true,
            (Some((_, m)), CvMetric::PredictionError) => mean < m,
            (Some((_, m)), CvMetric::Accuracy) => mean > m,
        };
        if better {
            best = Some((b, mean));
        }
    }
    let (b, best_score) = best.expect("grid is non-empty");
    Ok(CvResult {
        best: budgets[b],
        best_score,
        table,
    })
}

/// Writes the score table with header `s1,s2,fold,score`.
pub fn write_score_table<W: Write>(out: W, table: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in table {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Tuned budget and test-half metrics of one method in one replication.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub budget: SparsityBudget,
    pub cv_score: f64,
    pub metrics: SelectionMetrics,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub seed: u64,
    /// Truncation level picked for DC; also the selection threshold used
    /// when scoring both methods.
    pub tau: TruncationParam,
    pub dc: MethodOutcome,
    pub sgl: MethodOutcome,
}

/// The synthetic comparison: generate a dataset, tune DC and the
/// constrained sparse group lasso by cross-validation on the training
/// half, refit each on the whole training half and score on the test half.
///
/// DC is tuned over `tau_grid` jointly with its budgets.
#[derive(Debug, Clone)]
pub struct SyntheticExperiment {
    /// Generator settings; the seed is replaced per replication.
    pub spec: SyntheticSpec,
    pub tau_grid: Vec<TruncationParam>,
    pub cfg: SolverConfig,
    pub dc_plan: CvPlan,
    pub sgl_plan: CvPlan,
}

impl SyntheticExperiment {
    /// Leave-one-out CV; DC over `τ ∈ {0.01, 0.03, 0.1, 0.3}`,
    /// `s2 ∈ {2,4,6,8}`, `s1 ∈ {2,4,6,8}·s2`; the convex baseline over radii
    /// `s2 ∈ {2^(k/2) : k = −2..8}` and `s1 ∈ {1, 1.5, 2, 2.5, 3}·s2`.
    pub fn standard() -> Self {
        Self {
            spec: SyntheticSpec::new(0),
            tau_grid: [0.01, 0.03, 0.1, 0.3]
                .map(|t| TruncationParam::new(t).expect("positive"))
                .to_vec(),
            cfg: SolverConfig::default(),
            dc_plan: CvPlan {
                folds: Folds::LeaveOneOut,
                s2_grid: vec![2.0, 4.0, 6.0, 8.0],
                s1_grid: S1Grid::MultipleOfS2(vec![2.0, 4.0, 6.0, 8.0]),
                metric: CvMetric::PredictionError,
            },
            sgl_plan: CvPlan {
                folds: Folds::LeaveOneOut,
                s2_grid: (-2..=8).map(|k| 2f64.powf(f64::from(k) / 2.0)).collect(),
                s1_grid: S1Grid::MultipleOfS2(vec![1.0, 1.5, 2.0, 2.5, 3.0]),
                metric: CvMetric::PredictionError,
            },
        }
    }

    pub fn replicate(&self, seed: u64) -> Result<Replication> {
        if self.tau_grid.is_empty() {
            return Err(SgfsError::InvalidParameter {
                name: "tau_grid",
                reason: "empty".into(),
            });
        }
        let dataset = gen_synthetic_dataset(&SyntheticSpec {
            seed,
            ..self.spec.clone()
        })?;

        // Ties keep the smaller-index τ.
        let mut best: Option<(TruncationParam, CvResult)> = None;
        for &tau in &self.tau_grid {
            let cv = cross_validate(&dataset, &self.dc_plan, Method::Dc, tau, &self.cfg)?;
            if best.as_ref().is_none_or(|(_, b)| cv.best_score < b.best_score) {
                best = Some((tau, cv));
            }
        }
        let (tau, dc_cv) = best.expect("grid is non-empty");
        let x = fit(&dataset.train, Method::Dc, &dc_cv.best, tau, &self.cfg)?;
        let dc = MethodOutcome {
            budget: dc_cv.best,
            cv_score: dc_cv.best_score,
            metrics: compute_metrics(&x, &dataset, tau)?,
        };

        let sgl_cv = cross_validate(&dataset, &self.sgl_plan, Method::ConstrainedSgl, tau, &self.cfg)?;
        let x = fit(&dataset.train, Method::ConstrainedSgl, &sgl_cv.best, tau, &self.cfg)?;
        let sgl = MethodOutcome {
            budget: sgl_cv.best,
            cv_score: sgl_cv.best_score,
            metrics: compute_metrics(&x, &dataset, tau)?,
        };
        Ok(Replication { seed, tau, dc, sgl })
    }
}
