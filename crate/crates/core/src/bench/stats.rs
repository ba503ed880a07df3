//! Paired and unpaired nonparametric statistics.

use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest effective sample size for which the Wilcoxon null distribution
/// is enumerated exactly.
pub const EXACT_WILCOXON_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a NaN")]
    NotANumber,
}

/// Twice the average (1-based) rank of every value; ties share the mean of
/// the positions they span, so doubling keeps ranks integral.
pub fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share (start + 1 + end) / 2.
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        start = end;
    }
    ranks
}

/// Two-sided p-value of the Wilcoxon signed-rank test.
///
/// Zero differences are dropped and tied magnitudes get average ranks. Up to
/// 25 non-zero differences the null distribution of the positive rank sum is
/// enumerated exactly; above that a normal approximation with tie-corrected
/// variance and continuity correction is used. All-zero input gives 1.0.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&magnitudes);
    let w_pos: u64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let total: u64 = ranks.iter().sum();

    if n <= EXACT_WILCOXON_MAX_N {
        exact_p(&ranks, w_pos, total)
    } else {
        normal_p(&magnitudes, n, w_pos as f64 / 2.0)
    }
}

fn exact_p(ranks: &[u64], w_pos: u64, total: u64) -> f64 {
    // counts[s]: number of sign assignments with positive (doubled) sum s.
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    // The null distribution is symmetric about total / 2, so the two-sided
    // tail is everything at least as far from the centre as the observation.
    let observed = (2 * w_pos).abs_diff(total);
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as u64).abs_diff(total) >= observed)
        .map(|(_, c)| *c)
        .sum();
    extreme as f64 / (1u64 << ranks.len()) as f64
}

fn normal_p(magnitudes: &[f64], n: usize, w_pos: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_pos - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// `(2 * (wins + ties / 2), 2 * |a| * |b|)`: the common-language effect
/// size of `a` over `b` as an exact ratio of integers.
pub fn cles_counts(a: &[f64], b: &[f64]) -> Result<(u64, u64), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let rank_sum_a: u64 = ranks[..a.len()].iter().sum();
    let (na, nb) = (a.len() as u64, b.len() as u64);
    // Mann-Whitney: U = R_a - na (na + 1) / 2, doubled throughout.
    Ok((rank_sum_a - na * (na + 1), 2 * na * nb))
}

/// Probability that a random draw from `a` beats a random draw from `b`,
/// ties counting one half.
///
/// Computed from rank sums in `O((|a| + |b|) log(|a| + |b|))`.
/// `cles(a, b) + cles(b, a)` is exactly 1.0 in floating point.
pub fn cles(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (wins, total) = cles_counts(a, b)?;
    // Divide on the side at or below one half and take the complement
    // otherwise, so that swapping the samples mirrors the rounding.
    Ok(if 2 * wins <= total {
        wins as f64 / total as f64
    } else {
        1.0 - (total - wins) as f64 / total as f64
    })
}
