//! Summary statistics over posterior draws.

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n − 1)p`); the median of an even count is the midpoint of the two
/// central values. `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Quantiles of an unsorted sample. Returns `None` for an empty sample.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Option<Vec<f64>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Monte-Carlo standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(values: &[f64]) -> f64 {
    let n = values.len();
    let batches = (n as f64).sqrt().floor().max(2.0) as usize;
    let size = n / batches;
    if size < 2 {
        return (variance(values) / n as f64).sqrt();
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&values[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Split-R̂ over one or more chains of equal length.
///
/// Each chain is cut into two halves; R̂ compares between-half and
/// within-half variance. Returns `NaN` when fewer than four draws per chain
/// are available, and `1.0` for a chain without variation.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if n < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..n], &c[n..2 * n]])
        .collect();
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let grand = mean(&means);
    let between = n as f64 / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = halves.iter().map(|h| variance(h)).sum::<f64>() / m;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let pooled = (n as f64 - 1.0) / n as f64 * within + between / n as f64;
    (pooled / within).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_one_to_hundred_is_midpoint() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = quantiles(&v, &[0.5]).unwrap();
        assert_eq!(q[0], 50.5);
    }

    #[test]
    fn identical_values_collapse_quantiles() {
        let q = quantiles(&[3.0; 9], &[0.16, 0.5, 0.84]).unwrap();
        assert_eq!(q, vec![3.0, 3.0, 3.0]);
        assert!(quantiles(&[], &[0.5]).is_none());
    }

    #[test]
    fn rhat_near_one_for_stationary_and_large_for_shifted() {
        let a: Vec<f64> = (0..400).map(|i| ((i * 7919) % 101) as f64).collect();
        let b: Vec<f64> = (0..400).map(|i| ((i * 104729) % 101) as f64).collect();
        assert!((split_rhat(&[a.clone(), b]) - 1.0).abs() < 0.05);
        let trend: Vec<f64> = (0..400).map(|i| i as f64).collect();
        assert!(split_rhat(&[trend]) > 1.5);
    }
}
