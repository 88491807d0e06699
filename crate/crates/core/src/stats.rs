//! Small estimators for Markov-chain output.

/// Mean and naive standard error (independent samples).
pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Number of batches used by [`batch_means`].
pub const BATCHES: usize = 20;

/// Mean and batch-means standard error of a correlated series. Falls back
/// to the naive error for short series.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 * BATCHES {
        return mean_and_error(xs);
    }
    let size = n / BATCHES;
    let batches: Vec<f64> = xs
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let (_, err) = mean_and_error(&batches);
    (mean, err)
}

/// Pools several independent chains: the grand mean weighted by sample
/// count, and the error combined from each chain's own error.
pub fn pool(parts: &[(f64, f64, usize)]) -> (f64, f64, usize) {
    let total: usize = parts.iter().map(|p| p.2).sum();
    if total == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = parts.iter().map(|&(m, _, n)| m * n as f64).sum::<f64>() / total as f64;
    let var = parts
        .iter()
        .map(|&(_, e, n)| (e * n as f64 / total as f64).powi(2))
        .sum::<f64>();
    (mean, var.sqrt(), total)
}

/// Integrated autocorrelation time with Sokal's automatic window (c = 5).
/// Returns 0.5 for an uncorrelated series.
pub fn integrated_autocorr_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = (0..n - t).map(|i| (xs[i] - mean) * (xs[i + t] - mean)).sum::<f64>()
            / (n - t) as f64;
        tau += ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}
