//! Small sample statistics used by the estimators and test suites.

/// Sample mean and standard error of the mean.
///
/// A single observation has standard error 0.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Empirical distribution over `0..q` of a list of category indices.
pub fn empirical(categories: impl IntoIterator<Item = usize>, q: usize) -> Vec<f64> {
    let mut counts = vec![0usize; q];
    let mut n = 0usize;
    for c in categories {
        counts[c] += 1;
        n += 1;
    }
    counts
        .into_iter()
        .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect()
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions differ in support size");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Standard error of a Bernoulli proportion `p` estimated from `n` draws.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn tv() {
        let p = empirical([0, 0, 1, 2], 3);
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
        assert!((tv_distance(&p, &[1.0 / 3.0; 3]) - 1.0 / 6.0).abs() < 1e-15);
    }
}
