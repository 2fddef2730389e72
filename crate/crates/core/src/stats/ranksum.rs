use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::cmp::Ordering;

/// Combined sample size up to which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    ALess,
    /// `a` tends to be larger than `b`.
    AGreater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// Sum of the midranks of `a` in the pooled sample.
    pub statistic: f64,
    pub p_one_tailed: f64,
    pub method: RankTestMethod,
}

/// 1-based ranks with ties replaced by the mean rank of their block.
pub fn midranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid;
        }
        i = j;
    }
    ranks
}

/// One-tailed Wilcoxon rank-sum test of `a` against `b`.
///
/// Exact when `a.len() + b.len() <= EXACT_MAX_N`; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum<T: Scalar>(a: &[T], b: &[T], alternative: Alternative) -> Result<RankTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples {
            required: 1,
            found: a.len().min(b.len()),
        });
    }
    let pooled: Vec<T> = a.iter().chain(b).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..a.len()].iter().sum();
    let n = pooled.len();
    if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let observed: usize = doubled[..a.len()].iter().sum();
        Ok(RankTestResult {
            statistic,
            p_one_tailed: exact_tail(&doubled, a.len(), observed, alternative),
            method: RankTestMethod::Exact,
        })
    } else {
        Ok(RankTestResult {
            statistic,
            p_one_tailed: normal_tail(&pooled, a.len(), statistic, alternative),
            method: RankTestMethod::NormalApprox,
        })
    }
}

/// Null distribution of the rank sum by counting size-`k` subsets per sum.
fn exact_tail(doubled: &[usize], k: usize, observed: usize, alternative: Alternative) -> f64 {
    let max_sum: usize = doubled.iter().sum();
    // ways[j][s]: subsets of size j with doubled-rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for &r in doubled {
        for j in (1..=k).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[j - 1][s - r];
                if add != 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[k].iter().sum();
    let tail: f64 = match alternative {
        Alternative::ALess => ways[k][..=observed.min(max_sum)].iter().sum(),
        Alternative::AGreater => ways[k][observed.min(max_sum + 1)..].iter().sum(),
    };
    (tail / total).clamp(0.0, 1.0)
}

fn normal_tail<T: Scalar>(pooled: &[T], na: usize, statistic: f64, alternative: Alternative) -> f64 {
    let n = pooled.len() as f64;
    let (naf, nbf) = (na as f64, n - na as f64);
    let mean = naf * (n + 1.0) / 2.0;

    let mut sorted: Vec<f64> = pooled.iter().map(|v| v.as_f64()).collect();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = naf * nbf / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    match alternative {
        Alternative::ALess => std_normal.cdf((statistic - mean + 0.5) / sd),
        Alternative::AGreater => 1.0 - std_normal.cdf((statistic - mean - 0.5) / sd),
    }
}
