use dsm_core::analysis::{
    best_report, dataset_correlation, dunn_test, kruskal_wallis, rank_scores, wilcoxon_signed_rank, Correction,
};
use dsm_core::ledger::EvalResult;
use dsm_core::stats::spearman;
use proptest::prelude::*;

fn rec(model: &str, dataset: &str, score: f64) -> EvalResult {
    EvalResult {
        model: model.into(),
        dataset: dataset.into(),
        task: "similarity".into(),
        metric: "spearman".into(),
        score,
        coverage: 1.0,
    }
}

/// Average ranks by counting: rank = #less + (#equal + 1) / 2.
fn count_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn groups_strategy(ties: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let value = if ties {
        (0u8..6).prop_map(f64::from).boxed()
    } else {
        (-1e6f64..1e6).boxed()
    };
    prop::collection::vec(prop::collection::vec(value, 1..8), 2..5)
}

proptest! {
    #[test]
    fn kruskal_wallis_matches_classical_formula(groups in groups_strategy(false)) {
        let all: Vec<f64> = groups.concat();
        let mut sorted = all.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        prop_assume!(sorted.len() == all.len());
        let n = all.len() as f64;
        let ranks = count_ranks(&all);
        let mut off = 0;
        let mut s = 0.0;
        for g in &groups {
            let r: f64 = ranks[off..off + g.len()].iter().sum();
            s += r * r / g.len() as f64;
            off += g.len();
        }
        let classical = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
        let h = kruskal_wallis(&groups).unwrap();
        prop_assert!((h.statistic - classical.max(0.0)).abs() < 1e-10);
        prop_assert_eq!(h.df, Some((groups.len() - 1) as f64));
    }

    #[test]
    fn kruskal_wallis_with_ties_matches_rank_recomputation(groups in groups_strategy(true)) {
        let all: Vec<f64> = groups.concat();
        let n = all.len() as f64;
        let ranks = count_ranks(&all);
        let mean_rank = (n + 1.0) / 2.0;
        // H as the between-group share of rank variance, which is the
        // tie-corrected statistic
        let mut off = 0;
        let mut between = 0.0;
        for g in &groups {
            let rbar = ranks[off..off + g.len()].iter().sum::<f64>() / g.len() as f64;
            between += g.len() as f64 * (rbar - mean_rank).powi(2);
            off += g.len();
        }
        let total: f64 = ranks.iter().map(|r| (r - mean_rank).powi(2)).sum();
        let want = if total == 0.0 { 0.0 } else { (n - 1.0) * between / total };
        let h = kruskal_wallis(&groups).unwrap();
        prop_assert!((h.statistic - want).abs() < 1e-9, "{} vs {}", h.statistic, want);
        prop_assert!((0.0..=1.0).contains(&h.p_value));
    }

    #[test]
    fn bonferroni_never_lowers_p(groups in groups_strategy(true)) {
        let labeled: Vec<(String, Vec<f64>)> = groups.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g)).collect();
        let r = dunn_test(&labeled, Correction::Bonferroni).unwrap();
        let m = (labeled.len() * (labeled.len() - 1) / 2) as f64;
        for c in &r.comparisons {
            prop_assert!(c.p_adjusted >= c.p_raw);
            prop_assert!(c.p_adjusted <= 1.0);
            prop_assert!((c.p_adjusted - (c.p_raw * m).min(1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn wilcoxon_matches_sign_enumeration(pairs in prop::collection::vec((0u8..6, 0u8..6), 1..=12)) {
        let xs: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let d: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        prop_assume!(!d.is_empty());
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let ranks = count_ranks(&abs);
        let v: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let n = d.len();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= v + 1e-9 { le += 1; }
            if s >= v - 1e-9 { ge += 1; }
        }
        let total = (1u64 << n) as f64;
        let want = (2.0 * (le.min(ge) as f64 / total)).min(1.0);
        let r = wilcoxon_signed_rank(&xs, &ys).unwrap();
        prop_assert_eq!(r.statistic, v);
        prop_assert!((r.p_value - want).abs() < 1e-12);
    }

    #[test]
    fn ranks_ignore_monotone_transforms(scores in prop::collection::vec(-5.0f64..5.0, 2..12)) {
        let a: Vec<EvalResult> = scores.iter().enumerate().map(|(i, s)| rec(&format!("m{i}"), "d", *s)).collect();
        let b: Vec<EvalResult> = scores.iter().enumerate().map(|(i, s)| rec(&format!("m{i}"), "d", s.exp() * 3.0 + 1.0)).collect();
        prop_assert_eq!(rank_scores(&a).unwrap(), rank_scores(&b).unwrap());
    }

    #[test]
    fn dataset_correlation_is_symmetric(scores in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 2..5)) {
        let mut ledger = Vec::new();
        for (d, row) in scores.iter().enumerate() {
            for (m, s) in row.iter().enumerate() {
                ledger.push(rec(&format!("m{m}"), &format!("d{d}"), *s));
            }
        }
        let c = dataset_correlation(&ledger);
        let n = c.datasets.len();
        for i in 0..n {
            prop_assert_eq!(c.get(i, i), Some(1.0));
            for j in 0..n {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                if i != j {
                    prop_assert_eq!(c.get(i, j), spearman(&scores[i], &scores[j]).ok());
                }
            }
        }
    }
}

#[test]
fn identical_orderings_correlate_perfectly() {
    let mut l = Vec::new();
    for (i, m) in ["a", "b", "c", "d"].iter().enumerate() {
        l.push(rec(m, "X", i as f64));
        l.push(rec(m, "Y", 10.0 * i as f64));
    }
    assert_eq!(dataset_correlation(&l).get(0, 1), Some(1.0));
}

#[test]
fn single_entry_best_report() {
    let b = best_report(&[rec("SVD.w2.300", "RG65", 0.5)]);
    assert_eq!(b.len(), 1);
    assert_eq!(b[0].to_string(), "RG65 0.50 SVD.w2.300");
}
