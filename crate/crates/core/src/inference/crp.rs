/// `ln Γ(n)` for a positive integer `n`.
pub(crate) fn ln_factorial_minus_one(n: usize) -> f64 {
    (1..n).map(|j| (j as f64).ln()).sum()
}

/// Log probability of a partition under a CRP with concentration `alpha`:
/// `K ln α + Σ_k ln Γ(n_k) - Σ_{i<n} ln(α + i)`.
pub fn crp_log_prior(z: &[usize], alpha: f64) -> f64 {
    let k = z.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &c in z {
        counts[c] += 1;
    }
    crp_log_prior_counts(&counts, alpha)
}

pub(crate) fn crp_log_prior_counts(counts: &[usize], alpha: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let occupied = counts.iter().filter(|c| **c > 0).count();
    occupied as f64 * alpha.ln() + counts.iter().filter(|c| **c > 0).map(|&c| ln_factorial_minus_one(c)).sum::<f64>()
        - (0..n).map(|i| (alpha + i as f64).ln()).sum::<f64>()
}

/// Same probability built customer by customer: the `i`-th customer (0-based)
/// joins a table of size `n_k` with `n_k / (i + α)` or a new one with
/// `α / (i + α)`.
pub fn crp_log_prior_sequential(z: &[usize], alpha: f64) -> f64 {
    let mut counts: Vec<usize> = Vec::new();
    let mut lp = 0.0;
    for (i, &c) in z.iter().enumerate() {
        let den = i as f64 + alpha;
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        lp += if counts[c] == 0 { (alpha / den).ln() } else { (counts[c] as f64 / den).ln() };
        counts[c] += 1;
    }
    lp
}
