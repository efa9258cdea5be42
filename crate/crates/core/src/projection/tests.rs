use super::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// Sort-and-scan L1-ball projection, independent of the selection routine.
fn l1_projection_by_sorting(v: &[f64], radius: f64) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= radius {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &value) in u.iter().enumerate() {
        acc += value;
        let candidate = (acc - radius) / (k + 1) as f64;
        if value > candidate {
            theta = candidate;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

/// Largest violation of the optimality conditions of
/// `½‖x − v‖² + λ‖x‖₁ + η‖x‖_G`.
fn regularized_kkt_residual(x: &[f64], v: &[f64], lambda: f64, eta: f64, partition: &GroupPartition) -> f64 {
    let mut worst: f64 = 0.0;
    for members in partition.groups() {
        let norm = members.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            // dist(v_G, λ·[-1,1]^G) must not exceed η.
            let d = members
                .iter()
                .map(|&j| (v[j].abs() - lambda).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d - eta);
            continue;
        }
        for &j in members {
            let r = if x[j] != 0.0 {
                (x[j] - v[j] + lambda * x[j].signum() + eta * x[j] / norm).abs()
            } else {
                v[j].abs() - lambda
            };
            worst = worst.max(r);
        }
    }
    worst
}

#[test]
fn soft_threshold_examples() {
    assert_eq!(soft_threshold(&[2.0, -0.5, 1.0], 1.0), vec![1.0, 0.0, 0.0]);
    assert_eq!(soft_threshold(&[2.0, -0.5, 1.0], 0.0), vec![2.0, -0.5, 1.0]);
    assert_eq!(soft_threshold(&[2.0, -0.5, 1.0], 2.0), vec![0.0, 0.0, 0.0]);
    assert_eq!(soft_threshold(&[-3.0], 1.0), vec![-2.0]);
}

#[test]
fn l1_ball_examples() {
    assert_eq!(l1_ball_projection(&[3.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
    assert_eq!(l1_ball_projection(&[1.0, 1.0], 1.0).unwrap(), vec![0.5, 0.5]);
    assert_eq!(l1_ball_projection(&[-0.2, 0.3], 1.0).unwrap(), vec![-0.2, 0.3]);
    assert!(l1_ball_projection(&[1.0], 0.0).is_err());
    assert!(l1_ball_projection(&[1.0], -1.0).is_err());
}

#[test]
fn group_ball_examples() {
    let one = GroupPartition::contiguous(2, 1).unwrap();
    let x = group_ball_projection(&[3.0, 4.0], 2.5, &one).unwrap();
    assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    assert_eq!(group_ball_projection(&[0.3, 0.4], 2.5, &one).unwrap(), vec![0.3, 0.4]);

    // Block norms 3 and 4 project onto the radius-5 simplex as (2, 3).
    let two = GroupPartition::contiguous(4, 2).unwrap();
    let x = group_ball_projection(&[3.0, 0.0, 0.0, 4.0], 5.0, &two).unwrap();
    assert_abs_diff_eq!(x[0], 3.0 * 2.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(x[3], 4.0 * 3.0 / 4.0, epsilon = 1e-12);
    assert!(group_ball_projection(&[1.0, 1.0], 0.0, &one).is_err());
}

#[test]
fn eta_examples() {
    let singles = GroupPartition::contiguous(2, 2).unwrap();
    assert_eq!(eta_from_lambda(&[3.0, 1.0], 0.0, 2.0, &singles).unwrap(), Some(1.0));
    assert_eq!(eta_from_lambda(&[2.0, -2.0], 0.0, 2.0, &singles).unwrap(), Some(1.0));
    assert_eq!(eta_from_lambda(&[3.0, 1.0], 0.0, 5.0, &singles).unwrap(), None);
    // Thresholding by λ = 1 first leaves norms (2, 0).
    assert_eq!(eta_from_lambda(&[3.0, 1.0], 1.0, 1.0, &singles).unwrap(), Some(1.0));
}

#[test]
fn s1_of_lambda_examples() {
    let one = GroupPartition::contiguous(2, 1).unwrap();
    assert_abs_diff_eq!(s1_of_lambda(&[3.0, 4.0], 0.0, 2.5, &one).unwrap(), 3.5, epsilon = 1e-12);
    assert_eq!(s1_of_lambda(&[3.0, 4.0], 4.0, 0.0, &one).unwrap(), 0.0);
    assert_eq!(s1_of_lambda(&[3.0, 4.0], 10.0, 1.0, &one).unwrap(), 0.0);
}

#[test]
fn compute_x_examples() {
    let one = GroupPartition::contiguous(2, 1).unwrap();
    let duals = DualPair::new(0.0, 0.0).unwrap();
    assert_eq!(compute_x_from_duals(&[3.0, -4.0], duals, &one).unwrap(), vec![3.0, -4.0]);
    let x = compute_x_from_duals(&[3.0, 4.0], DualPair::new(0.0, 2.5).unwrap(), &one).unwrap();
    assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    assert!(DualPair::new(-1.0, 0.0).is_err());
}

#[test]
fn sglp_feasible_input_is_returned() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let v = [0.1, -0.2, 0.3, 0.0];
    let out = sglp(&v, 10.0, 10.0, &part, &cfg()).unwrap();
    assert_eq!(out.x, v.to_vec());
    assert_eq!((out.lambda, out.eta), (0.0, 0.0));
    assert!(!out.c1_active && !out.c2_active);
}

#[test]
fn sglp_single_group_both_active() {
    // L1 projection (1, 2) overshoots the group radius and group projection
    // (1.32, 1.76) overshoots the L1 radius. Answer: a + b = 3, a² + b² = 2.2².
    let a = (3.0 - 0.68_f64.sqrt()) / 2.0;
    let b = (3.0 + 0.68_f64.sqrt()) / 2.0;
    let lambda = (3.0 * b - 4.0 * a) / (b - a);
    let one = GroupPartition::contiguous(2, 1).unwrap();
    let out = sglp(&[3.0, 4.0], 3.0, 2.2, &one, &cfg()).unwrap();
    assert!(out.c1_active && out.c2_active);
    assert_abs_diff_eq!(out.x[0], a, epsilon = 1e-7);
    assert_abs_diff_eq!(out.x[1], b, epsilon = 1e-7);
    assert_abs_diff_eq!(out.lambda, lambda, epsilon = 1e-7);
    assert_abs_diff_eq!(out.lambda, 1.681, epsilon = 1e-3);
    let (r9, r10) = restricted_dual_residuals(
        &[3.0, 4.0],
        DualPair::new(out.lambda, out.eta).unwrap(),
        3.0,
        2.2,
        &[0, 1],
        &[0, 1],
        &one,
    )
    .unwrap();
    assert!(r9.abs() < 1e-9 && r10.abs() < 1e-9, "{r9} {r10}");
}

#[test]
fn sglp_single_constraint_cases() {
    let singles = GroupPartition::contiguous(2, 2).unwrap();
    // Singleton groups: the two norms coincide, the tighter radius wins.
    let out = sglp(&[3.0, 1.0], 2.0, 5.0, &singles, &cfg()).unwrap();
    assert_eq!(out.x, vec![2.0, 0.0]);
    assert!(out.c1_active && !out.c2_active);
    assert_eq!(out.lambda, 1.0);

    let one = GroupPartition::contiguous(2, 1).unwrap();
    let out = sglp(&[3.0, 4.0], 10.0, 2.5, &one, &cfg()).unwrap();
    assert_abs_diff_eq!(out.x[0], 1.5, epsilon = 1e-12);
    assert!(!out.c1_active && out.c2_active);
    assert_abs_diff_eq!(out.eta, 2.5, epsilon = 1e-12);
}

#[test]
fn sglp_rejects_bad_radii() {
    let one = GroupPartition::contiguous(2, 1).unwrap();
    assert!(sglp(&[1.0, 1.0], 0.0, 1.0, &one, &cfg()).is_err());
    assert!(sglp(&[1.0, 1.0], 1.0, -1.0, &one, &cfg()).is_err());
    assert!(sglp(&[1.0], 1.0, 1.0, &one, &cfg()).is_err());
}

#[test]
fn sglp_reports_misconfigured_tolerance() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let tight = SolverConfig {
        bisect_tol: 1e-30,
        ..cfg()
    };
    let err = sglp(&[40.0, -30.0, 20.0, 10.0], 5.0, 4.0, &part, &tight).unwrap_err();
    assert!(matches!(err, SgfsError::NotConverged { .. }), "{err}");
}

#[test]
fn restricted_vacuous_and_empty() {
    let part = GroupPartition::contiguous(6, 3).unwrap();
    let v = [5.0, -4.0, 3.0, 0.5, -2.0, 1.0];
    let all: Vec<usize> = (0..6).collect();
    let full = sglp(&v, 4.0, 3.0, &part, &cfg()).unwrap();
    let restricted = restricted_sglp(&v, 4.0, 3.0, &all, &all, &part, &cfg()).unwrap();
    assert_eq!(full, restricted);

    let none = restricted_sglp(&v, 1.0, 1.0, &[], &[], &part, &cfg()).unwrap();
    assert_eq!(none.x, v.to_vec());
}

#[test]
fn restricted_passes_through_unconstrained() {
    let part = GroupPartition::contiguous(6, 3).unwrap();
    let v = [5.0, -4.0, 3.0, 0.5, -2.0, 1.0 / 3.0];
    let t1 = [0, 1, 2, 3, 4];
    let t3 = [0, 1];
    let out = restricted_sglp(&v, 2.0, 1.0, &t1, &t3, &part, &cfg()).unwrap();
    assert_eq!(out.x[5].to_bits(), v[5].to_bits());
    let (l1, gn) = restricted_norms(&out.x, &t1, &t3, &part).unwrap();
    assert!(l1 <= 2.0 + 1e-9 && gn <= 1.0 + 1e-9, "{l1} {gn}");
}

#[test]
fn restricted_zero_radii_pin_constrained_coordinates() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let v = [5.0, 0.01, 0.02, -0.03];
    let out = restricted_sglp(&v, 0.0, 0.0, &[1, 2, 3], &[2, 3], &part, &cfg()).unwrap();
    assert_eq!(out.x, vec![5.0, 0.0, 0.0, 0.0]);
}

#[test]
fn restricted_rejects_bad_sets() {
    let part = GroupPartition::contiguous(4, 2).unwrap();
    let v = [1.0; 4];
    // t3 not inside t1.
    assert!(restricted_sglp(&v, 1.0, 1.0, &[0], &[2, 3], &part, &cfg()).is_err());
    // t3 not a union of groups.
    assert!(restricted_sglp(&v, 1.0, 1.0, &[0, 1, 2], &[2], &part, &cfg()).is_err());
    assert!(restricted_sglp(&v, 1.0, 1.0, &[7], &[], &part, &cfg()).is_err());
    assert!(restricted_sglp(&v, -1.0, 1.0, &[0], &[], &part, &cfg()).is_err());
}

fn vector_and_partition() -> impl Strategy<Value = (Vec<f64>, GroupPartition)> {
    (1usize..5, 1usize..5).prop_flat_map(|(groups, size)| {
        let p = groups * size;
        (
            proptest::collection::vec(-20.0..20.0f64, p),
            Just(GroupPartition::contiguous(p, groups).unwrap()),
        )
    })
}

proptest! {
    #[test]
    fn l1_projection_matches_sorting((v, _) in vector_and_partition(), radius in 0.01..30.0f64) {
        let fast = l1_ball_projection(&v, radius).unwrap();
        let slow = l1_projection_by_sorting(&v, radius);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn compute_x_solves_regularized_problem(
        (v, part) in vector_and_partition(),
        lambda in 0.0..10.0f64,
        eta in 0.0..10.0f64,
    ) {
        let x = compute_x_from_duals(&v, DualPair::new(lambda, eta).unwrap(), &part).unwrap();
        prop_assert!(regularized_kkt_residual(&x, &v, lambda, eta, &part) <= 1e-8);
        let s1 = s1_of_lambda(&v, lambda, eta, &part).unwrap();
        prop_assert!((s1 - l1_norm(&x)).abs() <= 1e-9 * (1.0 + s1));
    }

    #[test]
    fn sglp_satisfies_variational_inequality(
        (v, part) in vector_and_partition(),
        s1 in 0.5..40.0f64,
        s2 in 0.5..30.0f64,
        probes in proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, 16), 8),
    ) {
        let out = sglp(&v, s1, s2, &part, &cfg()).unwrap();
        let (l1, gn) = constraint_norms(&out.x, &part).unwrap();
        prop_assert!(l1 <= s1 + 1e-6 && gn <= s2 + 1e-6);
        // ⟨v − x, z − x⟩ ≤ 0 for feasible z, built by scaling random probes into the set.
        for probe in probes {
            let z: Vec<f64> = probe.iter().take(v.len()).copied().collect();
            let (zl1, zgn) = constraint_norms(&z, &part).unwrap();
            let scale = (s1 / zl1.max(1e-12)).min(s2 / zgn.max(1e-12)).min(1.0);
            let dot: f64 = v.iter().zip(&out.x).zip(&z)
                .map(|((vi, xi), zi)| (vi - xi) * (zi * scale - xi))
                .sum();
            prop_assert!(dot <= 1e-6 * (1.0 + v.iter().map(|a| a * a).sum::<f64>()), "dot = {}", dot);
        }
    }
}
