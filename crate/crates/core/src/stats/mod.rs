//! Correlation, rank-sum testing and the percentile bootstrap.

mod bootstrap;
mod correlation;
mod ranksum;

pub use bootstrap::{bootstrap, bootstrap_indices, DEFAULT_ITERATIONS, percentile, stream_rng, BootstrapEstimate, Reducer};
pub use correlation::{pearson, spearman, CorrelationResult, CI_METHOD};
pub use ranksum::{midranks, wilcoxon_rank_sum, Alternative, RankTestMethod, RankTestResult, EXACT_MAX_N};
