//! One-tailed Wilcoxon signed-rank test on paired errors.
//!
//! With `d = a - b` and zero differences dropped, the alternative "a has
//! smaller errors" predicts a large `W-` (rank sum of negative differences),
//! so `p = P(W- >= observed)` under the symmetric null. Average ranks for
//! tied `|d|` are half-integers; the exact path works on doubled ranks.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest `n` handled by exact enumeration in [`WilcoxonMethod::Auto`].
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// pairs left after dropping zero differences
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`
    pub statistic: f64,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Doubled average ranks of `|d|`, ascending ties share the mean rank.
pub fn doubled_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs_diffs.len()).collect();
    order.sort_by(|&i, &j| abs_diffs[i].total_cmp(&abs_diffs[j]));
    let mut ranks = vec![0u64; abs_diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, doubled
        let twice_avg = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = twice_avg;
        }
        i = j + 1;
    }
    ranks
}

/// `P(W- >= observed)` by counting sign assignments: a subset-sum DP over
/// doubled ranks, equivalent to enumerating all `2^n` assignments.
pub fn exact_upper_tail(doubled: &[u64], observed_doubled: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &r in doubled {
        let r = r as usize;
        for s in (r..counts.len()).rev() {
            counts[s] += counts[s - r];
        }
    }
    let hits: u64 = counts[observed_doubled.min(total + 1) as usize..]
        .iter()
        .sum();
    hits as f64 / (1u64 << doubled.len()) as f64
}

/// Normal approximation with tie and continuity correction.
pub fn normal_upper_tail(doubled: &[u64], observed_doubled: u64) -> f64 {
    let n = doubled.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = doubled.to_vec();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let w = observed_doubled as f64 / 2.0;
    if var <= 0.0 {
        return if w >= mean { 1.0 } else { 0.0 };
    }
    let z = (w - mean - 0.5) / var.sqrt();
    Normal::standard().cdf(-z)
}

/// Tests whether `errors_a` tends to be smaller than `errors_b`.
pub fn wilcoxon_one_tailed(errors_a: &[f64], errors_b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(errors_a, errors_b, WilcoxonMethod::Auto)
}

pub fn wilcoxon_with(
    errors_a: &[f64],
    errors_b: &[f64],
    method: WilcoxonMethod,
) -> Result<WilcoxonResult> {
    if errors_a.len() != errors_b.len() {
        return Err(Error::Alignment(format!(
            "paired errors differ in length: {} vs {}",
            errors_a.len(),
            errors_b.len()
        )));
    }
    let diffs: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidInput("non-finite paired error".into()));
    }
    if diffs.is_empty() {
        return Err(Error::IdenticalErrors);
    }
    let doubled = doubled_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_minus2: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = doubled.iter().sum();
    let n = diffs.len();
    let method = match method {
        WilcoxonMethod::Auto if n <= EXACT_MAX_N => WilcoxonMethod::Exact,
        WilcoxonMethod::Auto => WilcoxonMethod::Normal,
        m => m,
    };
    let p_value = match method {
        WilcoxonMethod::Exact => exact_upper_tail(&doubled, w_minus2),
        _ => normal_upper_tail(&doubled, w_minus2),
    };
    let w_minus = w_minus2 as f64 / 2.0;
    let w_plus = (total2 - w_minus2) as f64 / 2.0;
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        method,
    })
}
