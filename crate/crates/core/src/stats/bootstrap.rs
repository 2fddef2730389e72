use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ITERATIONS: usize = 1000;

/// Deterministic RNG for stream `stream` under `seed`. Streams are
/// independent, so work keyed by stream index can run in any order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Mean,
    Median,
}

impl Reducer {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Reducer::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Reducer::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                percentile(&v, 0.5)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    /// Statistic on the original sample.
    pub point: f64,
    /// Percentile interval at 2.5 / 97.5.
    pub ci95: (f64, f64),
    pub n_iter: usize,
    pub seed: u64,
}

/// Linear-interpolated quantile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap over a sample of size `n`. `statistic` receives the
/// resampled indices; iteration `i` draws from stream `i` of `seed`.
pub fn bootstrap_indices<F>(n: usize, statistic: F, n_iter: usize, seed: u64) -> Result<BootstrapEstimate>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    }
    if n_iter == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one iteration".into()));
    }
    let identity: Vec<usize> = (0..n).collect();
    let point = statistic(&identity);
    let mut draws: Vec<f64> = (0..n_iter)
        .into_par_iter()
        .map(|iter| {
            let mut rng = stream_rng(seed, iter as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&idx)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(BootstrapEstimate {
        point,
        ci95: (percentile(&draws, 0.025), percentile(&draws, 0.975)),
        n_iter,
        seed,
    })
}

pub fn bootstrap(values: &[f64], reducer: Reducer, n_iter: usize, seed: u64) -> Result<BootstrapEstimate> {
    bootstrap_indices(
        values.len(),
        |idx| {
            let sample: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            reducer.apply(&sample)
        },
        n_iter,
        seed,
    )
}
