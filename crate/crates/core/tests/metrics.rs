mod common;

use physreg_core::data::PhysicsLabel;
use physreg_core::eval::{
    auc, average_precision, kendall_tau_b, linear_probe_scores, neighborhood_consistency, pcr, poa_macro, spearman,
    ProbeConfig, DEFAULT_PAIR_CAP,
};
use physreg_core::rng::substream;
use physreg_core::Matrix;
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;

use common::{ap_oracle, auc_oracle, poa_oracle, random_labels, random_scores, random_unit_rows, rel_close};

fn ordinals(labels: &[PhysicsLabel]) -> Vec<f64> {
    labels.iter().map(|l| l.ordinal() as f64).collect()
}

/// Strictly increasing map that keeps ties tied.
fn warp(s: &[f64]) -> Vec<f64> {
    s.iter().map(|x| (x * 0.7).exp() * 3.0 - 1.0 + x.powi(3)).collect()
}

fn contact(labels: &[PhysicsLabel]) -> Vec<bool> {
    labels.iter().map(|l| l.is_contact()).collect()
}

proptest! {
    #[test]
    fn rank_metrics_ignore_monotone_maps(seed in any::<u64>(), n in 3usize..60) {
        let mut rng = substream(seed, "metric-warp", 0);
        let labels = random_labels(&mut rng, n);
        let s = random_scores(&mut rng, n);
        let w = warp(&s);
        let y = ordinals(&labels);
        match (spearman(&y, &s), spearman(&y, &w)) {
            (Ok(a), Ok(b)) => prop_assert!(rel_close(a, b, 1e-12)),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
        match (kendall_tau_b(&y, &s), kendall_tau_b(&y, &w)) {
            (Ok(a), Ok(b)) => prop_assert!(rel_close(a, b, 1e-12)),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
        let c = contact(&labels);
        if let (Ok(a), Ok(b)) = (auc(&c, &s), auc(&c, &w)) {
            prop_assert!(rel_close(a, b, 1e-12));
        }
        if let (Ok(a), Ok(b)) = (average_precision(&c, &s), average_precision(&c, &w)) {
            prop_assert!(rel_close(a, b, 1e-12));
        }
        if let (Ok(a), Ok(b)) = (poa_macro(&labels, &s, 0, DEFAULT_PAIR_CAP), poa_macro(&labels, &w, 0, DEFAULT_PAIR_CAP)) {
            prop_assert!(rel_close(a, b, 1e-12));
        }
    }

    #[test]
    fn negating_scores_flips_signs(seed in any::<u64>(), n in 3usize..60) {
        let mut rng = substream(seed, "metric-neg", 0);
        let labels = random_labels(&mut rng, n);
        let s = random_scores(&mut rng, n);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        let y = ordinals(&labels);
        if let (Ok(a), Ok(b)) = (spearman(&y, &s), spearman(&y, &neg)) {
            prop_assert!((a + b).abs() < 1e-12);
        }
        if let (Ok(a), Ok(b)) = (kendall_tau_b(&y, &s), kendall_tau_b(&y, &neg)) {
            prop_assert!((a + b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
        let c = contact(&labels);
        if let (Ok(a), Ok(b)) = (auc(&c, &s), auc(&c, &neg)) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
        if let (Ok(a), Ok(b)) = (poa_macro(&labels, &s, 0, DEFAULT_PAIR_CAP), poa_macro(&labels, &neg, 0, DEFAULT_PAIR_CAP)) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_agree_with_pair_counting(seed in any::<u64>(), n in 2usize..50) {
        let mut rng = substream(seed, "metric-oracle", 0);
        let labels = random_labels(&mut rng, n);
        let s = random_scores(&mut rng, n);
        let c = contact(&labels);
        prop_assert_eq!(auc(&c, &s).ok().map(|v| (v * 1e9).round()), auc_oracle(&c, &s).map(|v| (v * 1e9).round()));
        prop_assert_eq!(average_precision(&c, &s).ok().map(|v| (v * 1e9).round()), ap_oracle(&c, &s).map(|v| (v * 1e9).round()));
        prop_assert_eq!(
            poa_macro(&labels, &s, 0, DEFAULT_PAIR_CAP).ok().map(|v| (v * 1e9).round()),
            poa_oracle(&labels, &s).map(|v| (v * 1e9).round())
        );
    }

    #[test]
    fn ap_is_bounded_below_by_prevalence_of_perfect_ranking(seed in any::<u64>(), n in 2usize..50) {
        let mut rng = substream(seed, "metric-ap", 0);
        let labels = random_labels(&mut rng, n);
        let c = contact(&labels);
        let perfect: Vec<f64> = c.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        if let Ok(ap) = average_precision(&c, &perfect) {
            prop_assert!((ap - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn sampled_poa_tracks_exhaustive() {
    let mut rng = substream(1, "poa-sample", 0);
    let labels = random_labels(&mut rng, 900);
    let s: Vec<f64> = labels.iter().map(|l| l.ordinal() as f64 + rng.sample::<f64, _>(StandardNormal)).collect();
    let exact = poa_macro(&labels, &s, 0, usize::MAX).unwrap();
    let sampled = poa_macro(&labels, &s, 0, 20_000).unwrap();
    assert!((exact - sampled).abs() < 0.02, "{exact} vs {sampled}");
    assert_eq!(sampled, poa_macro(&labels, &s, 0, 20_000).unwrap());
}

#[test]
fn pcr_of_unstructured_points_is_near_one() {
    let mut rng = substream(2, "pcr-null", 0);
    let (z, _) = random_unit_rows(&mut rng, 600, 8);
    let labels = random_labels(&mut rng, 600);
    let p = pcr(&z, &labels).unwrap();
    assert!((p.ratio - 1.0).abs() < 0.03, "{}", p.ratio);
    assert!(!p.degenerate);
}

#[test]
fn neighborhood_of_unstructured_points_is_near_chance() {
    let mut rng = substream(3, "nbr-null", 0);
    let n = 900;
    let (z, _) = random_unit_rows(&mut rng, n, 8);
    let labels: Vec<PhysicsLabel> = (0..n).map(|i| common::LABELS[i % 3]).collect();
    let videos: Vec<String> = (0..n).map(|i| format!("v{}", i / 5)).collect();
    let video_refs: Vec<&str> = videos.iter().map(String::as_str).collect();
    let r = neighborhood_consistency(&z, &labels, &video_refs, 10, 0).unwrap();
    for c in common::LABELS {
        assert!((r.diagonal.get(c) - 1.0 / 3.0).abs() < 0.05, "{c:?} {}", r.diagonal.get(c));
    }
}

#[test]
fn probe_is_deterministic_and_null_on_independent_labels() {
    let mut rng = substream(4, "probe-null", 0);
    let n = 400;
    let x = Matrix::from_vec(n, 6, (0..n * 6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    let signal: Vec<bool> = (0..n).map(|i| x.get(i, 0) + 0.3 * x.get(i, 1) > 0.0).collect();
    let (train, eval) = (x.select_rows(&(0..n / 2).collect::<Vec<_>>()), x.select_rows(&(n / 2..n).collect::<Vec<_>>()));
    let cfg = ProbeConfig::default();
    let a = linear_probe_scores(&train, &signal[..n / 2], &eval, &cfg).unwrap();
    let b = linear_probe_scores(&train, &signal[..n / 2], &eval, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(auc(&signal[n / 2..], &a).unwrap() > 0.95);

    // labels drawn independently of the features carry nothing to find
    let mut aucs = Vec::new();
    for k in 0..20 {
        let mut perm = substream(4, "probe-perm", k);
        let train_null: Vec<bool> = (0..n / 2).map(|_| perm.random_bool(0.5)).collect();
        let eval_null: Vec<bool> = (0..n / 2).map(|_| perm.random_bool(0.5)).collect();
        let s = linear_probe_scores(&train, &train_null, &eval, &cfg).unwrap();
        aucs.push(auc(&eval_null, &s).unwrap());
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!((mean - 0.5).abs() < 0.05, "null mean AUC {mean}");
}

#[test]
fn single_class_metrics_are_undefined() {
    let labels = vec![PhysicsLabel::Supported; 10];
    let s: Vec<f64> = (0..10).map(f64::from).collect();
    assert!(auc(&contact(&labels), &s).is_err());
    assert!(spearman(&ordinals(&labels), &s).is_err());
    assert!(poa_macro(&labels, &s, 0, DEFAULT_PAIR_CAP).is_err());
}
