use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::model::{
    group_norm, l0_oracle, l1_norm, objective, truncated_l1_counts, GroupPartition, ProblemInstance, SolverConfig,
    SparsityBudget, SupportSets, TruncationParam,
};
use crate::projection::{restricted_norms, sglp};

fn gaussian(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    (a, y)
}

fn tight() -> SolverConfig {
    SolverConfig {
        agm_rel_tol: 1e-14,
        agm_max_iter: 100_000,
        ..SolverConfig::default()
    }
}

// Normal-equations oracle for full column rank; pseudo-inverse otherwise.
fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(y, 1e-12).unwrap()
}

#[test]
fn agm_on_identity_is_the_projection() {
    let part = GroupPartition::contiguous(6, 2).unwrap();
    let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0, -4.0, 1.0]);
    let inst = ProblemInstance::new(DMatrix::identity(6, 6), y.clone(), part.clone()).unwrap();
    let budget = SparsityBudget::radius(4.0, 3.0).unwrap();
    let (x, state) = agm_solve(&inst, &budget, None, &tight(), None).unwrap();
    let proj = sglp(y.as_slice(), 4.0, 3.0, &part, &tight()).unwrap().x;
    for (a, b) in x.iter().zip(&proj) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
    assert!(state.converged);
}

#[test]
fn agm_scalar_clamp() {
    let part = GroupPartition::contiguous(1, 1).unwrap();
    let inst = ProblemInstance::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 2.0), part).unwrap();
    let budget = SparsityBudget::radius(1.0, 1.0).unwrap();
    let (x, _) = agm_solve(&inst, &budget, None, &tight(), None).unwrap();
    assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
}

#[test]
fn agm_generous_radii_give_least_squares() {
    let (a, y) = gaussian(6, 8, 1);
    let part = GroupPartition::contiguous(8, 2).unwrap();
    let x_ls = least_squares(&a, &y);
    let inst = ProblemInstance::new(a, y, part.clone()).unwrap();
    let budget = SparsityBudget::radius(1e4, 1e4).unwrap();
    // Underdetermined: gradient descent from zero stays in the row space and
    // converges to the minimum-norm solution.
    let (x, _) = agm_solve(&inst, &budget, None, &tight(), None).unwrap();
    for (u, v) in x.iter().zip(x_ls.iter()) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-5);
    }
}

#[test]
fn constrained_sgl_at_least_squares_radii() {
    let (a, y) = gaussian(20, 6, 2);
    let part = GroupPartition::contiguous(6, 3).unwrap();
    let x_ls = least_squares(&a, &y);
    let r1 = l1_norm(x_ls.as_slice());
    let r2 = group_norm(x_ls.as_slice(), &part).unwrap();
    let inst = ProblemInstance::new(a, y, part).unwrap();
    let x = constrained_sgl_solve(&inst, &SparsityBudget::radius(r1, r2).unwrap(), &tight()).unwrap();
    for (u, v) in x.iter().zip(x_ls.iter()) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-5);
    }
}

#[test]
fn constrained_sgl_l1_shrinks_with_radius() {
    let (a, y) = gaussian(15, 10, 3);
    let part = GroupPartition::contiguous(10, 5).unwrap();
    let inst = ProblemInstance::new(a, y, part).unwrap();
    let mut last = f64::INFINITY;
    for s1 in [3.0, 2.0, 1.5, 1.0, 0.5] {
        let x = constrained_sgl_solve(&inst, &SparsityBudget::radius(s1, 2.0).unwrap(), &tight()).unwrap();
        let norm = l1_norm(&x);
        assert!(norm <= last + 1e-6, "{norm} > {last}");
        last = norm;
    }
}

#[test]
fn agm_rejects_count_budget_and_bad_warm_start() {
    let part = GroupPartition::contiguous(2, 1).unwrap();
    let inst = ProblemInstance::new(DMatrix::identity(2, 2), DVector::zeros(2), part.clone()).unwrap();
    let count = SparsityBudget::count(1, 1, &part).unwrap();
    assert!(agm_solve(&inst, &count, None, &tight(), None).is_err());
    let radius = SparsityBudget::radius(1.0, 1.0).unwrap();
    assert!(agm_solve(&inst, &radius, None, &tight(), Some(&[0.0])).is_err());
}

#[test]
fn agm_iteration_cap_flags_non_convergence() {
    let (a, y) = gaussian(10, 10, 4);
    let part = GroupPartition::contiguous(10, 2).unwrap();
    let inst = ProblemInstance::new(a, y, part).unwrap();
    let cfg = SolverConfig {
        agm_max_iter: 2,
        agm_rel_tol: 1e-15,
        ..SolverConfig::default()
    };
    let budget = SparsityBudget::radius(2.0, 1.5).unwrap();
    let (x, state) = agm_solve(&inst, &budget, None, &cfg, None).unwrap();
    assert!(!state.converged);
    assert_eq!(state.t, 2);
    assert!(objective(&inst, &x).unwrap() <= objective(&inst, &[0.0; 10]).unwrap());
}

#[test]
fn dc_recovers_the_spike() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let y = DVector::from_vec(vec![5.0, 0.0, 0.0, 0.0]);
    let inst = ProblemInstance::new(DMatrix::identity(4, 4), y, part.clone()).unwrap();
    let budget = SparsityBudget::count(1, 1, &part).unwrap();
    let tau = TruncationParam::new(0.01).unwrap();
    let (x, trace) = dc_solve(&inst, &budget, tau, &SolverConfig::default(), None).unwrap();
    let oracle = l0_oracle(&inst, &budget).unwrap();
    assert_eq!(oracle, vec![5.0, 0.0, 0.0, 0.0]);
    for (u, v) in x.iter().zip(&oracle) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-6);
    }
    assert!(objective(&inst, &x).unwrap() < 1e-10);
    assert!(trace.converged);
}

#[test]
fn dc_with_full_budget_solves_least_squares() {
    let (a, y) = gaussian(6, 6, 5);
    let part = GroupPartition::contiguous(6, 3).unwrap();
    let x_ls = least_squares(&a, &y);
    let inst = ProblemInstance::new(a, y, part.clone()).unwrap();
    let budget = SparsityBudget::count(6, 3, &part).unwrap();
    let tau = TruncationParam::new(0.01).unwrap();
    let cfg = SolverConfig {
        dc_rel_tol: 1e-12,
        ..tight()
    };
    let (x, _) = dc_solve(&inst, &budget, tau, &cfg, None).unwrap();
    for (u, v) in x.iter().zip(x_ls.iter()) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-4);
    }
}

#[test]
fn dc_rejects_infeasible_init_and_radius_budget() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let inst = ProblemInstance::new(DMatrix::identity(4, 4), DVector::zeros(4), part.clone()).unwrap();
    let tau = TruncationParam::new(0.1).unwrap();
    let budget = SparsityBudget::count(1, 1, &part).unwrap();
    let cfg = SolverConfig::default();
    assert!(dc_solve(&inst, &budget, tau, &cfg, Some(&[1.0, 1.0, 0.0, 0.0])).is_err());
    assert!(dc_solve(&inst, &budget, tau, &cfg, Some(&[1.0, 0.0])).is_err());
    let radius = SparsityBudget::radius(1.0, 1.0).unwrap();
    assert!(dc_solve(&inst, &radius, tau, &cfg, None).is_err());
}

#[test]
fn linearization_at_zero_uses_full_sets() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let inst = ProblemInstance::new(DMatrix::identity(4, 4), DVector::zeros(4), part.clone()).unwrap();
    let budget = SparsityBudget::count(3, 1, &part).unwrap();
    let tau = TruncationParam::new(0.5).unwrap();
    let lin = linearize(&[0.0; 4], &inst, &budget, tau, &SolverConfig::default()).unwrap();
    assert_eq!(lin.sets, SupportSets::full(&part));
    assert_eq!((lin.l1_radius, lin.group_radius), (1.5, 0.5));

    let lin = linearize(&[2.0, 0.1, 0.0, 0.0], &inst, &budget, tau, &SolverConfig::default()).unwrap();
    assert_eq!(lin.sets.t1, vec![1, 2, 3]);
    assert_eq!(lin.sets.t2, vec![1]);
    assert_eq!((lin.l1_radius, lin.group_radius), (1.0, 0.0));
}

fn random_instance(seed: u64) -> (ProblemInstance, SparsityBudget, TruncationParam) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = 2 + (seed % 3) as usize;
    let p = groups * 3;
    let (a, y) = gaussian(8, p, seed.wrapping_mul(7919));
    let part = GroupPartition::contiguous(p, groups).unwrap();
    let s2 = 1 + (seed as usize) % groups;
    let s1 = s2 + (seed as usize / 3) % (p - s2 + 1);
    let tau: f64 = 0.05 + 0.5 * rand::Rng::random::<f64>(&mut rng);
    (
        ProblemInstance::new(a, y, part.clone()).unwrap(),
        SparsityBudget::count(s1, s2, &part).unwrap(),
        TruncationParam::new(tau).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dc_trace_is_monotone_and_iterates_feasible(seed in 0u64..10_000) {
        let (inst, budget, tau) = random_instance(seed);
        let cfg = SolverConfig::default();
        let (x, trace) = dc_solve_keep_iterates(&inst, &budget, tau, &cfg, None).unwrap();
        for w in trace.objectives.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let kept = trace.iterates_kept.unwrap();
        prop_assert_eq!(kept.len(), trace.objectives.len());
        for it in &kept {
            let (c1, c2) = truncated_l1_counts(it, &inst.partition, tau).unwrap();
            prop_assert!(c1 <= budget.s1 + 1e-5 && c2 <= budget.s2 + 1e-5, "counts ({}, {})", c1, c2);
            // Each iterate satisfies the subproblem built around itself.
            let lin = linearize(it, &inst, &budget, tau, &cfg).unwrap();
            let (l1, gn) = restricted_norms(it, &lin.sets.t1, &lin.sets.t3, &inst.partition).unwrap();
            prop_assert!(l1 <= lin.l1_radius + 1e-5 * (1.0 + lin.l1_radius));
            prop_assert!(gn <= lin.group_radius + 1e-5 * (1.0 + lin.group_radius));
        }
        prop_assert_eq!(&x, kept.last().unwrap());
        prop_assert_eq!(*trace.objectives.last().unwrap(), objective(&inst, &x).unwrap());
    }

    #[test]
    fn agm_never_ends_above_its_start(seed in 0u64..10_000, s1 in 0.1f64..5.0, s2 in 0.1f64..5.0) {
        let (a, y) = gaussian(7, 6, seed);
        let part = GroupPartition::contiguous(6, 3).unwrap();
        let inst = ProblemInstance::new(a, y, part.clone()).unwrap();
        let budget = SparsityBudget::radius(s1, s2).unwrap();
        let (x, state) = agm_solve(&inst, &budget, None, &SolverConfig::default(), None).unwrap();
        prop_assert!(state.objective <= objective(&inst, &[0.0; 6]).unwrap());
        prop_assert!(l1_norm(&x) <= s1 * (1.0 + 1e-9) + 1e-9);
        prop_assert!(group_norm(&x, &part).unwrap() <= s2 * (1.0 + 1e-9) + 1e-9);
    }
}
