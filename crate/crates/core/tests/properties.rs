mod common;

use common::*;
use fairaudit::datamodel::{read_predictions, write_predictions_to, FileFormat, GroupPair, PredictionRecord, Split};
use fairaudit::fairness::{pareto_front, rate_gap, ParetoPoint};
use fairaudit::grid::{keys, ModelSummary};
use fairaudit::metrics::{auroc, ece, rates_at_threshold, select_f1_threshold, RateMetric};
use fairaudit::probe::{fit_probe, LabeledEmbeddings, Matrix, ProbeOptions};
use fairaudit::select::{default_criteria, select_by_criterion};
use fairaudit::shift::{decompose_gap, GapDecomposition, ThresholdMode};
use fairaudit::metrics::ThresholdPolicy;
use fairaudit::stats::{bootstrap, midranks, pearson, spearman, stream_rng, wilcoxon_rank_sum, Alternative, Reducer};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(0u32..=20).prop_map(|k| f64::from(k) / 20.0), 0.0..=1.0f64], n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_map(|(s, mut l)| {
                l[0] = 1;
                l[1] = 0;
                (s, l)
            })
    })
}

proptest! {
    #[test]
    fn auroc_matches_pair_count((s, l) in scored_labels(60)) {
        prop_assert_eq!(auroc(&s, &l).unwrap(), auroc_oracle(&s, &l));
    }

    #[test]
    fn auroc_invariant_under_monotone_maps((s, l) in scored_labels(60)) {
        let a: f64 = auroc(&s, &l).unwrap();
        let squashed: Vec<f64> = s.iter().map(|v| 0.5 * v + 0.25).collect();
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        prop_assert_eq!(auroc(&squashed, &l).unwrap(), a);
        // cubing can merge distinct tiny values only below f64 resolution
        prop_assert!((auroc(&cubed, &l).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn auroc_label_flip_complements((s, l) in scored_labels(60)) {
        let flipped: Vec<u8> = l.iter().map(|v| 1 - v).collect();
        let a: f64 = auroc(&s, &l).unwrap();
        prop_assert!((auroc(&s, &flipped).unwrap() + a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f1_threshold_is_optimal((s, l) in scored_labels(60), probes in prop::collection::vec(0.0..=1.0f64, 20)) {
        let t = select_f1_threshold(&s, &l).unwrap();
        let best = rates_at_threshold(&s, &l, t).f1();
        for p in probes.into_iter().chain(s.iter().copied()) {
            prop_assert!(rates_at_threshold(&s, &l, p).f1() <= best + 1e-15);
        }
        prop_assert_eq!(t, f1_exhaustive(&s, &l).0);
    }

    #[test]
    fn single_bin_ece_is_calibration_in_the_large((s, l) in scored_labels(60)) {
        let n = s.len() as f64;
        let mean_s = s.iter().sum::<f64>() / n;
        let mean_l = l.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        prop_assert!((ece(&s, &l, 1).unwrap() - (mean_s - mean_l).abs()).abs() < 1e-12);
    }

    #[test]
    fn pareto_matches_brute_force(raw in prop::collection::vec((0u8..8, 0u8..8), 1..80)) {
        let pts: Vec<ParetoPoint<f64>> = raw
            .iter()
            .enumerate()
            .map(|(i, &(p, g))| ParetoPoint::new(format!("m{i:02}"), f64::from(p) / 8.0, f64::from(g) / 8.0))
            .collect();
        let front = pareto_front(&pts).unwrap();
        let mut ids: Vec<String> = front.front.iter().map(|p| p.model_id.clone()).collect();
        ids.sort();
        prop_assert_eq!(&ids, &pareto_brute_force(&pts));
        for p in &pts {
            if !front.contains(&p.model_id) {
                prop_assert!(front.front.iter().any(|f| f.dominates(p)));
            }
        }
    }

    #[test]
    fn decomposition_residual_vanishes(r in prop::array::uniform4(0.0..=1.0f64)) {
        let pair = GroupPair::new("f", "m").unwrap();
        let d = GapDecomposition::from_rates(RateMetric::Fpr, pair, r[0], r[1], r[2], r[3]);
        prop_assert!(d.residual.abs() <= 1e-12);
        prop_assert!((d.ood_gap - (r[2] - r[3])).abs() <= 1e-15);
        prop_assert!((d.change_g1() - (r[2] - r[0])).abs() <= 1e-15);
    }

    #[test]
    fn pearson_affine_invariance(
        xy in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
        a in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64],
        b in -5.0..5.0f64,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(base) = pearson(&x, &y) else { return Ok(()) };
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r = pearson(&moved, &y).unwrap().r;
        prop_assert!((r - a.signum() * base.r).abs() < 1e-9);
        prop_assert!(base.ci95.0 <= base.r && base.r <= base.ci95.1);
        prop_assert!((0.0..=1.0).contains(&base.p));
    }

    #[test]
    fn spearman_is_pearson_on_midranks(xy in prop::collection::vec((0u8..6, 0u8..6), 3..30)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.iter().map(|&(a, b)| (f64::from(a), f64::from(b))).unzip();
        let (rx, ry) = (midranks(&x), midranks(&y));
        match (spearman(&x, &y), pearson(&rx, &ry)) {
            (Ok(s), Ok(p)) => prop_assert!((s.r - p.r).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            (s, p) => prop_assert!(false, "disagree: {:?} vs {:?}", s, p),
        }
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration(pooled in prop::collection::vec(0u8..5, 2..=12), split in 1usize..12) {
        let na = split.min(pooled.len() - 1);
        let v: Vec<f64> = pooled.iter().map(|&k| f64::from(k)).collect();
        let (a, b) = v.split_at(na);
        prop_assert_eq!(wilcoxon_rank_sum(a, b, Alternative::ALess).unwrap().p_one_tailed, wilcoxon_brute_force(a, b, true));
        prop_assert_eq!(wilcoxon_rank_sum(a, b, Alternative::AGreater).unwrap().p_one_tailed, wilcoxon_brute_force(a, b, false));
    }

    #[test]
    fn criteria_ignore_grid_order(vals in prop::collection::vec((0u8..5, 0u8..5), 1..20), seed in any::<u64>()) {
        let grid: Vec<ModelSummary> = vals
            .iter()
            .enumerate()
            .map(|(i, &(g, p))| {
                ModelSummary::new(format!("m{i:02}"), "ERM")
                    .with(keys::GAP, f64::from(g))
                    .with(keys::PROBE_AUROC, f64::from(p))
                    .with(keys::VAL_AUROC, f64::from(p))
            })
            .collect();
        let mut shuffled = grid.clone();
        let mut rng = stream_rng(seed, 0);
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        for c in default_criteria().iter().filter(|c| grid[0].get(&c.metric).is_some()) {
            prop_assert_eq!(select_by_criterion(&grid, c).unwrap(), select_by_criterion(&shuffled, c).unwrap());
        }
    }

    #[test]
    fn bootstrap_is_seed_deterministic(v in prop::collection::vec(-3.0..3.0f64, 1..40), seed in any::<u64>()) {
        let a = bootstrap(&v, Reducer::Mean, 200, seed).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = single.install(|| bootstrap(&v, Reducer::Mean, 200, seed).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((0.0..=1.0f64, 0u8..=1, prop::option::of("[a-z]{1,6}")), 1..20)) {
        let recs: Vec<PredictionRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, (s, l, g))| PredictionRecord {
                sample_id: format!("s{i}"),
                model_id: "m".into(),
                dataset_id: "d".into(),
                split: Split::Test,
                score: format!("{s:.6}").parse().unwrap(),
                label: *l,
                attributes: g.iter().map(|g| ("sex".to_string(), g.clone())).collect::<BTreeMap<_, _>>(),
            })
            .collect();
        let mut buf = Vec::new();
        write_predictions_to(&mut buf, &recs, FileFormat::Csv).unwrap();
        let back = read_predictions(buf.as_slice(), FileFormat::Csv).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            prop_assert_eq!(a.score, b.score);
            prop_assert_eq!(a.attribute("sex"), b.attribute("sex"));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gap_antisymmetry_and_decomposition(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let src = random_frame(&mut rng, "m", "a", 30);
        let tar = random_frame(&mut rng, "m", "b", 30);
        let pair = GroupPair::new("f", "m").unwrap();
        for metric in RateMetric::ALL {
            let g = rate_gap(&src, &pair, metric, 0.5).unwrap();
            let s = rate_gap(&src, &pair.swapped(), metric, 0.5).unwrap();
            prop_assert_eq!(g.signed_gap, -s.signed_gap);
            let d = decompose_gap(&src, &tar, metric, &pair, ThresholdMode::FrozenSource(ThresholdPolicy::Fixed(0.5))).unwrap();
            prop_assert!(d.decomposition.residual.abs() <= 1e-12);
            prop_assert_eq!(d.decomposition.ood_gap, rate_gap(&tar, &pair, metric, 0.5).unwrap().signed_gap);
        }
    }
}

fn labeled(rows: &[Vec<f64>], labels: &[usize]) -> LabeledEmbeddings<f64> {
    LabeledEmbeddings::new(rows, labels.iter().map(|k| format!("c{k}")).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn probe_rotation_invariance(seed in any::<u64>(), angle in 0.0..std::f64::consts::TAU) {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = stream_rng(seed, 0);
        let n = 240;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let labels: Vec<usize> = rows.iter().enumerate().map(|(i, r)| if i < 3 { i } else if r[0] + r[1] > 0.8 { 2 } else if r[0] > 0.0 { 1 } else { 0 }).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let rotated: Vec<Vec<f64>> = rows.iter().map(|r| vec![c * r[0] - s * r[1], s * r[0] + c * r[1]]).collect();
        let opts = ProbeOptions { l2_grid: vec![0.05], standardize: false, max_iter: 1000, tol: 1e-9 };
        let fit = |x: &[Vec<f64>]| fit_probe(&labeled(&x[..160], &labels[..160]), &labeled(&x[160..], &labels[160..]), &opts).unwrap().model;
        let (m1, m2) = (fit(&rows), fit(&rotated));
        let p1 = m1.predict_proba(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let p2 = m2.predict_proba(&Matrix::from_rows(&rotated).unwrap()).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-5, "{} vs {}", x, y);
            }
        }
    }
}
