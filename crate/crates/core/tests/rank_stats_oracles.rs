use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tsauc::rank_stats::{
    auc_from_u, correct, exact_pvalue, mww_pvalue, normal_pvalue, u_statistic, Alternative, Correction,
    GroupedScores,
};

/// Ordered-pair count with half credit for ties.
fn brute_u(pos: &[f64], neg: &[f64]) -> f64 {
    let mut u = 0.0;
    for p in pos {
        for q in neg {
            if p > q {
                u += 1.0;
            } else if p == q {
                u += 0.5;
            }
        }
    }
    u
}

/// Upper-tail p-value by listing every assignment of the pooled values to the groups.
fn enumerate_pvalue(pos: &[f64], neg: &[f64]) -> f64 {
    let pooled: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let n = pooled.len();
    let k = pos.len();
    let observed = brute_u(pos, neg);
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, v) in pooled.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    a.push(*v)
                } else {
                    b.push(*v)
                }
            }
            (a, b)
        };
        total += 1;
        if brute_u(&a, &b) >= observed {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn scores(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| if ties { rng.random_range(0..6) as f64 } else { rng.random::<f64>() })
        .collect()
}

#[test]
fn auc_equals_pair_fraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..300 {
        let (a, b) = (rng.random_range(1..25), rng.random_range(1..25));
        let pos = scores(&mut rng, a, trial % 2 == 0);
        let neg = scores(&mut rng, b, trial % 2 == 0);
        let g = GroupedScores::new(pos.clone(), neg.clone()).unwrap();
        let u = u_statistic(&g);
        assert_eq!(u, brute_u(&pos, &neg));
        assert_eq!(auc_from_u(u, a, b), brute_u(&pos, &neg) / (a * b) as f64);
    }
}

#[test]
fn exact_pvalues_match_enumeration() {
    let g = GroupedScores::new(vec![3.0, 4.0], vec![1.0, 2.0]).unwrap();
    assert_eq!(enumerate_pvalue(&[3.0, 4.0], &[1.0, 2.0]), 1.0 / 6.0);
    assert!((mww_pvalue(&g, Alternative::Greater) - 1.0 / 6.0).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let a = rng.random_range(1..8);
        let b = rng.random_range(1..=(12 - a).min(8));
        let pos = scores(&mut rng, a, false);
        let neg = scores(&mut rng, b, false);
        let g = GroupedScores::new(pos.clone(), neg.clone()).unwrap();
        let expected = enumerate_pvalue(&pos, &neg);
        assert!((mww_pvalue(&g, Alternative::Greater) - expected).abs() < 1e-12);
    }
}

#[test]
fn exact_and_normal_agree_at_ten_by_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let pos: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.5).collect();
        let neg: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let g = GroupedScores::new(pos, neg).unwrap();
        for alt in [Alternative::Greater, Alternative::TwoSided] {
            worst = worst.max((exact_pvalue(&g, alt) - normal_pvalue(&g, alt)).abs());
        }
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn null_pvalues_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let mut ps: Vec<f64> = (0..1000)
        .map(|_| {
            let pos: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
            let neg: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
            mww_pvalue(&GroupedScores::new(pos, neg).unwrap(), Alternative::Greater)
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).abs().max((p - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.06, "KS distance {ks}");
}

#[test]
fn seventeen_feature_correction_levels() {
    let p = vec![0.5; 17];
    let bonf = correct(&p, 0.05, Correction::Bonferroni).unwrap().levels[0];
    let sidak = correct(&p, 0.05, Correction::Sidak).unwrap().levels[0];
    assert_eq!(format!("{bonf:.4}"), "0.0029");
    assert_eq!(format!("{sidak:.3}"), "0.003");
}

fn score_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -10.0..10.0f64], 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn u_complementarity(pos in score_vec(), neg in score_vec()) {
        let g = GroupedScores::new(pos.clone(), neg.clone()).unwrap();
        prop_assert_eq!(u_statistic(&g) + u_statistic(&g.swapped()), (pos.len() * neg.len()) as f64);
    }

    #[test]
    fn auc_invariant_under_increasing_transform(pos in score_vec(), neg in score_vec()) {
        let f = |v: &f64| (v * 0.7).exp() + 3.0 * v;
        let g = GroupedScores::new(pos.clone(), neg.clone()).unwrap();
        let h = GroupedScores::new(pos.iter().map(f).collect(), neg.iter().map(f).collect()).unwrap();
        prop_assert_eq!(u_statistic(&g), u_statistic(&h));
    }

    #[test]
    fn corrections_nest(p in prop::collection::vec(0.0..0.2f64, 1..25)) {
        let alpha = 0.05;
        let bonf = correct(&p, alpha, Correction::Bonferroni).unwrap();
        let holm = correct(&p, alpha, Correction::Holm).unwrap();
        let sidak = correct(&p, alpha, Correction::Sidak).unwrap();
        for (i, &pi) in p.iter().enumerate() {
            let raw = pi < alpha;
            prop_assert!(!bonf.decisions[i] || holm.decisions[i]);
            prop_assert!(!holm.decisions[i] || raw);
            prop_assert!(!sidak.decisions[i] || raw);
            prop_assert!(bonf.levels[i] <= sidak.levels[i]);
        }
    }

    #[test]
    fn pvalues_in_unit_interval(pos in score_vec(), neg in score_vec()) {
        let g = GroupedScores::new(pos, neg).unwrap();
        for alt in [Alternative::Greater, Alternative::TwoSided] {
            let p = mww_pvalue(&g, alt);
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }
}
