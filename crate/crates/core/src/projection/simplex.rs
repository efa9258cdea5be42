/// Threshold `θ ≥ 0` with `Σ max(u_i − θ, 0) = mass` for non-negative `u`.
///
/// Returns 0 when the total is already within `mass`. Runs in linear time by
/// repeatedly partitioning around the median of the remaining candidates
/// (`select_nth_unstable`, worst-case linear), accumulating the elements
/// known to lie above the threshold. `values` is reordered.
pub(crate) fn threshold_for_mass(values: &mut [f64], mass: f64) -> f64 {
    let total: f64 = values.iter().sum();
    if total <= mass {
        return 0.0;
    }
    if mass <= 0.0 {
        return values.iter().copied().fold(0.0, f64::max);
    }

    let (mut start, mut end) = (0, values.len());
    let mut above_sum = 0.0;
    let mut above_count = 0usize;
    while start < end {
        let window = &mut values[start..end];
        let mid = window.len() / 2;
        window.select_nth_unstable_by(mid, f64::total_cmp);
        let pivot = window[mid];
        let upper_sum: f64 = window[mid..].iter().sum();
        let upper_count = window.len() - mid;

        let mass_at_pivot = above_sum + upper_sum - (above_count + upper_count) as f64 * pivot;
        if mass_at_pivot < mass {
            // θ < pivot: everything from the pivot up stays in the support.
            above_sum += upper_sum;
            above_count += upper_count;
            end = start + mid;
        } else {
            start += mid + 1;
        }
    }
    ((above_sum - mass) / above_count as f64).max(0.0)
}
