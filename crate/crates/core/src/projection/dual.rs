use crate::error::{Result, SgfsError};
use crate::model::{GroupPartition, ProjectionOutcome, SolverConfig};

use super::simplex::threshold_for_mass;
use super::{shrink, shrink_block};

/// Which coordinates the two constraints see. Coordinates in neither list
/// are unconstrained and pass through unchanged.
pub(super) struct Layout {
    /// Groups under the group-norm constraint (and the L1 constraint).
    c2_groups: Vec<usize>,
    /// Features under the L1 constraint only.
    solo: Vec<usize>,
}

impl Layout {
    pub(super) fn full(partition: &GroupPartition) -> Self {
        Self {
            c2_groups: (0..partition.num_groups()).collect(),
            solo: Vec::new(),
        }
    }

    pub(super) fn restricted(partition: &GroupPartition, t1: &[usize], t3: &[usize]) -> Result<Self> {
        let p = partition.p();
        let mut in_t1 = vec![false; p];
        let mut in_t3 = vec![false; p];
        for (set, mask, name) in [(t1, &mut in_t1, "t1"), (t3, &mut in_t3, "t3")] {
            for &j in set {
                if j >= p {
                    return Err(SgfsError::InvalidParameter {
                        name: "support set",
                        reason: format!("{name} contains index {j} >= p = {p}"),
                    });
                }
                mask[j] = true;
            }
        }
        if let Some(j) = (0..p).find(|&j| in_t3[j] && !in_t1[j]) {
            return Err(SgfsError::InvalidParameter {
                name: "t3",
                reason: format!("feature {j} is in t3 but not in t1"),
            });
        }
        let c2_groups: Vec<usize> = (0..partition.num_groups())
            .filter(|&g| partition.group(g).iter().all(|&j| in_t3[j]))
            .collect();
        let covered = c2_groups.iter().map(|&g| partition.group(g).len()).sum::<usize>();
        if covered != in_t3.iter().filter(|&&b| b).count() {
            return Err(SgfsError::InvalidParameter {
                name: "t3",
                reason: "t3 must be a union of whole groups".into(),
            });
        }
        let solo = (0..p).filter(|&j| in_t1[j] && !in_t3[j]).collect();
        Ok(Self { c2_groups, solo })
    }

    fn constrained<'a>(&'a self, partition: &'a GroupPartition) -> impl Iterator<Item = usize> + 'a {
        self.c2_groups
            .iter()
            .flat_map(move |&g| partition.group(g).iter().copied())
            .chain(self.solo.iter().copied())
    }

    /// `(L1 norm over constrained features, group norm over constrained groups)`.
    pub(super) fn norms(&self, x: &[f64], partition: &GroupPartition) -> (f64, f64) {
        let mut l1 = self.solo.iter().map(|&j| x[j].abs()).sum::<f64>();
        let mut gn = 0.0;
        for &g in &self.c2_groups {
            let (sq, a) = partition
                .group(g)
                .iter()
                .fold((0.0, 0.0), |(sq, a), &j| (sq + x[j] * x[j], a + x[j].abs()));
            l1 += a;
            gn += sq.sqrt();
        }
        (l1, gn)
    }
}

/// `(ŝ1, Σ max(‖v^λ_g‖ − η, 0))` over the constrained coordinates.
pub(super) fn evaluate_duals(
    v: &[f64],
    partition: &GroupPartition,
    layout: &Layout,
    lambda: f64,
    eta: f64,
) -> (f64, f64) {
    let mut s1_hat = layout.solo.iter().map(|&j| (v[j].abs() - lambda).max(0.0)).sum::<f64>();
    let mut group_mass = 0.0;
    for &g in &layout.c2_groups {
        let (sq, l1) = partition.group(g).iter().fold((0.0, 0.0), |(sq, l1), &j| {
            let t = (v[j].abs() - lambda).max(0.0);
            (sq + t * t, l1 + t)
        });
        let norm = sq.sqrt();
        if norm > eta {
            s1_hat += (norm - eta) * l1 / norm;
            group_mass += norm - eta;
        }
    }
    (s1_hat, group_mass)
}

const SOLO: u32 = u32::MAX;

/// False-position steps allowed after bisection.
const REFINE_STEPS: usize = 40;

/// Magnitudes of the constrained coordinates tagged with their C2 slot,
/// pruned as the lower end of the bisection bracket rises.
struct DualSystem {
    entries: Vec<(f64, u32)>,
    slots: usize,
    sq: Vec<f64>,
    l1: Vec<f64>,
    scratch: Vec<f64>,
}

impl DualSystem {
    fn new(v: &[f64], partition: &GroupPartition, layout: &Layout) -> Self {
        let mut entries = Vec::new();
        for (slot, &g) in layout.c2_groups.iter().enumerate() {
            for &j in partition.group(g) {
                if v[j] != 0.0 {
                    entries.push((v[j].abs(), slot as u32));
                }
            }
        }
        entries.extend(layout.solo.iter().filter(|&&j| v[j] != 0.0).map(|&j| (v[j].abs(), SOLO)));
        let slots = layout.c2_groups.len();
        Self {
            entries,
            slots,
            sq: vec![0.0; slots],
            l1: vec![0.0; slots],
            scratch: Vec::with_capacity(slots),
        }
    }

    fn prune(&mut self, lower: f64) {
        self.entries.retain(|&(a, _)| a > lower);
    }

    /// `(η̂, ŝ1)` at `λ`, or `None` when the group equation has no solution.
    fn evaluate(&mut self, lambda: f64, s2: f64) -> Option<(f64, f64)> {
        self.sq.iter_mut().for_each(|s| *s = 0.0);
        self.l1.iter_mut().for_each(|s| *s = 0.0);
        let mut solo = 0.0;
        for &(a, slot) in &self.entries {
            let t = a - lambda;
            if t > 0.0 {
                if slot == SOLO {
                    solo += t;
                } else {
                    self.sq[slot as usize] += t * t;
                    self.l1[slot as usize] += t;
                }
            }
        }
        self.scratch.clear();
        self.scratch.extend(self.sq.iter().map(|s| s.sqrt()));
        if self.scratch.iter().sum::<f64>() < s2 {
            return None;
        }
        let eta = threshold_for_mass(&mut self.scratch, s2);
        let mut s1_hat = solo;
        for k in 0..self.slots {
            let norm = self.sq[k].sqrt();
            if norm > eta {
                s1_hat += (norm - eta) * self.l1[k] / norm;
            }
        }
        Some((eta, s1_hat))
    }
}

pub(super) struct SglpSolver<'a> {
    v: &'a [f64],
    s1: f64,
    s2: f64,
    partition: &'a GroupPartition,
    layout: &'a Layout,
    cfg: &'a SolverConfig,
}

impl<'a> SglpSolver<'a> {
    pub(super) fn new(
        v: &'a [f64],
        s1: f64,
        s2: f64,
        partition: &'a GroupPartition,
        layout: &'a Layout,
        cfg: &'a SolverConfig,
    ) -> Self {
        Self {
            v,
            s1,
            s2,
            partition,
            layout,
            cfg,
        }
    }

    pub(super) fn solve(&self) -> Result<ProjectionOutcome> {
        let (l1, gn) = self.layout.norms(self.v, self.partition);
        if l1 <= self.s1 && gn <= self.s2 {
            return Ok(self.outcome(self.v.to_vec(), 0.0, 0.0, 0));
        }

        // Only the L1 constraint binds.
        let mut magnitudes: Vec<f64> = self.layout.constrained(self.partition).map(|j| self.v[j].abs()).collect();
        let theta1 = threshold_for_mass(&mut magnitudes, self.s1);
        let x_c1 = self.assemble(theta1, 0.0);
        if self.layout.norms(&x_c1, self.partition).1 <= self.s2 {
            return Ok(self.outcome(x_c1, theta1, 0.0, 0));
        }

        // Only the group constraint binds.
        let mut norms: Vec<f64> = self
            .layout
            .c2_groups
            .iter()
            .map(|&g| self.partition.group(g).iter().map(|&j| self.v[j] * self.v[j]).sum::<f64>().sqrt())
            .collect();
        let theta2 = threshold_for_mass(&mut norms, self.s2);
        let x_c2 = self.assemble(0.0, theta2);
        if self.layout.norms(&x_c2, self.partition).0 <= self.s1 {
            return Ok(self.outcome(x_c2, 0.0, theta2, 0));
        }

        self.bisect(magnitudes.iter().copied().fold(0.0, f64::max))
    }

    fn bisect(&self, lambda_max: f64) -> Result<ProjectionOutcome> {
        let tol = self.cfg.bisect_tol;
        let mut system = DualSystem::new(self.v, self.partition, self.layout);
        let (mut lower, mut upper) = (0.0_f64, lambda_max);
        let cap = ((upper - lower) / tol).log2().ceil().max(0.0) as usize + 8;
        let mut s_low: Option<f64> = None;
        let mut s_up: Option<f64> = None;
        let mut iterations = 0;

        while upper - lower > tol {
            if iterations >= cap {
                return Err(SgfsError::NotConverged {
                    method: "sglp bisection",
                    iterations,
                });
            }
            let mid = 0.5 * (lower + upper);
            match system.evaluate(mid, self.s2) {
                Some((_, s1_hat)) if s1_hat > self.s1 => {
                    lower = mid;
                    s_low = Some(s1_hat);
                    system.prune(lower);
                }
                found => {
                    upper = mid;
                    s_up = found.map(|(_, s)| s);
                }
            }
            iterations += 1;
        }

        // ŝ1 is piecewise smooth inside a bracket this narrow, so Illinois
        // false-position steps pin λ to the root instead of leaving an O(tol)
        // L1 slack.
        // A lower end whose L1 excess is at rounding level is the better
        // answer when it sits closer to the root.
        let close = 1e-13 * (1.0 + self.s1);
        let mut lambda = upper;
        let low_val = s_low.or_else(|| system.evaluate(lower, self.s2).map(|(_, s)| s));
        if let (Some(up_val), Some(low_val)) = (s_up, low_val) {
            let (mut g_low, mut g_up) = (low_val - self.s1, up_val - self.s1);
            let mut last_side = 0i8;
            for _ in 0..REFINE_STEPS {
                if -g_up <= close || g_low <= close || g_low <= g_up {
                    break;
                }
                let candidate = lower + g_low / (g_low - g_up) * (upper - lower);
                if !(candidate > lower && candidate < upper) {
                    break;
                }
                iterations += 1;
                match system.evaluate(candidate, self.s2) {
                    Some((_, s)) if s <= self.s1 => {
                        upper = candidate;
                        g_up = s - self.s1;
                        if last_side == 1 {
                            g_low *= 0.5;
                        }
                        last_side = 1;
                    }
                    Some((_, s)) => {
                        lower = candidate;
                        g_low = s - self.s1;
                        if last_side == -1 {
                            g_up *= 0.5;
                        }
                        last_side = -1;
                    }
                    None => {
                        upper = candidate;
                        g_up = f64::NEG_INFINITY;
                        break;
                    }
                }
            }
            lambda = if g_low <= close && g_low < -g_up { lower } else { upper };
        }

        let eta = system.evaluate(lambda, self.s2).map_or(0.0, |(eta, _)| eta);
        Ok(self.outcome(self.assemble(lambda, eta), lambda, eta, iterations))
    }

    fn assemble(&self, lambda: f64, eta: f64) -> Vec<f64> {
        let mut x = self.v.to_vec();
        for &j in &self.layout.solo {
            x[j] = shrink(self.v[j], lambda);
        }
        for &g in &self.layout.c2_groups {
            let members = self.partition.group(g);
            for &j in members {
                x[j] = shrink(self.v[j], lambda);
            }
            if eta > 0.0 {
                shrink_block(&mut x, members, eta);
            }
        }
        x
    }

    fn outcome(&self, x: Vec<f64>, lambda: f64, eta: f64, iterations: usize) -> ProjectionOutcome {
        let (l1, gn) = self.layout.norms(&x, self.partition);
        let tol = self.cfg.feas_tol;
        ProjectionOutcome {
            c1_active: l1 >= self.s1 - tol,
            c2_active: gn >= self.s2 - tol,
            x,
            lambda,
            eta,
            iterations,
        }
    }
}
