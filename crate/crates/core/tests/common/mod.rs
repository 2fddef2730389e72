//! Independent oracles and random generators shared by the property and
//! acceptance suites.
#![allow(dead_code)]

use fairaudit::datamodel::{build_frame, EvaluationFrame, PredictionRecord, Split};
use fairaudit::fairness::ParetoPoint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// O(n²) pair counting, ties counted half: returns (2·wins + ties, 2·P·N).
pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> (u64, u64) {
    let mut num = 0u64;
    let mut den = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            den += 2;
            if si > sj {
                num += 2;
            } else if si == sj {
                num += 1;
            }
        }
    }
    (num, den)
}

pub fn auroc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let (num, den) = auroc_pairs(scores, labels);
    num as f64 / den as f64
}

/// F1 of the rule `score >= t`, as an exact fraction (2tp, 2tp + fp + fn).
pub fn f1_fraction(scores: &[f64], labels: &[u8], t: f64) -> (u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= t, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (2 * tp, 2 * tp + fp + fn_)
}

/// Exhaustive search over {0, 1}, every distinct score and every midpoint of
/// adjacent distinct scores; ties in F1 go to the smallest threshold.
pub fn f1_exhaustive(scores: &[f64], labels: &[u8]) -> (f64, (u64, u64)) {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut cands = vec![0.0, 1.0];
    cands.extend(distinct.iter().copied());
    cands.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best = (cands[0], f1_fraction(scores, labels, cands[0]));
    for &t in &cands[1..] {
        let f = f1_fraction(scores, labels, t);
        // f > best  <=>  f.0 * best.1 > best.0 * f.1
        if (f.0 as u128) * (best.1 .1 as u128) > (best.1 .0 as u128) * (f.1 as u128) {
            best = (t, f);
        }
    }
    best
}

/// Step-wise AP over distinct-score prefixes, tied scores entering together.
pub fn ap_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &cut in &distinct {
        let k = scores.iter().filter(|&&s| s >= cut).count() as f64;
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| s >= cut && l == 1).count() as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / k);
        prev_recall = recall;
    }
    ap
}

/// Midranks by direct counting: rank = #less + (#equal + 1) / 2, doubled.
pub fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&w| w < v).count() as u64;
            let equal = values.iter().filter(|&&w| w == v).count() as u64;
            2 * less + equal + 1
        })
        .collect()
}

/// Brute-force one-tailed permutation p-value, P(W <= w_obs) for "a less",
/// enumerating every assignment of |a| pooled positions to `a`.
pub fn wilcoxon_brute_force(a: &[f64], b: &[f64], a_less: bool) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let n = pooled.len();
    let observed: u64 = ranks[..a.len()].iter().sum();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (a_less && w <= observed) || (!a_less && w >= observed) {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Ids of points not dominated by any other point.
pub fn pareto_brute_force(points: &[ParetoPoint<f64>]) -> Vec<String> {
    let mut ids: Vec<String> = points
        .iter()
        .filter(|p| {
            !points.iter().any(|q| {
                q.performance >= p.performance
                    && q.gap <= p.gap
                    && (q.performance > p.performance || q.gap < p.gap)
            })
        })
        .map(|p| p.model_id.clone())
        .collect();
    ids.sort();
    ids
}

/// Scores on a coarse grid so ties are frequent.
pub fn tied_scores(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.random_range(0..=levels)) / f64::from(levels)).collect()
}

/// Labels with at least one of each class.
pub fn mixed_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    assert!(n >= 2);
    let mut l: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    l[0] = 1;
    l[1] = 0;
    l
}

pub fn record(id: usize, model: &str, dataset: &str, score: f64, label: u8, group: &str) -> PredictionRecord {
    PredictionRecord {
        sample_id: format!("s{id}"),
        model_id: model.into(),
        dataset_id: dataset.into(),
        split: Split::Test,
        score,
        label,
        attributes: BTreeMap::from([("sex".to_string(), group.to_string())]),
    }
}

/// Random frame over groups "f" and "m" where every group holds both classes.
pub fn random_frame(rng: &mut ChaCha8Rng, model: &str, dataset: &str, max_per_group: usize) -> EvaluationFrame {
    let mut recs = Vec::new();
    for g in ["f", "m"] {
        let n = rng.random_range(4..=max_per_group.max(4));
        for i in 0..n {
            let label = match i {
                0 => 1,
                1 => 0,
                _ => u8::from(rng.random::<bool>()),
            };
            let score = if rng.random_bool(0.3) {
                f64::from(rng.random_range(0..=10u32)) / 10.0
            } else {
                rng.random::<f64>()
            };
            recs.push(record(recs.len(), model, dataset, score, label, g));
        }
    }
    build_frame(&recs, model, dataset, Split::Test, "sex").unwrap().frame
}
