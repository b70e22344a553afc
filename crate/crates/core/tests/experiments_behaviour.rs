use tsauc::experiments::{run_reduction, univariate, Method, ReductionMode, ReductionProtocol};
use tsauc::rank_stats::Correction;
use tsauc::synth::GaussianShift;
use tsauc::tsauc::SearchSpace;

fn quick(mode: ReductionMode, fractions: Vec<f64>, repeats: usize, seed: u64) -> ReductionProtocol {
    ReductionProtocol {
        fractions,
        repeats,
        seed,
        search: SearchSpace { ls_values: vec![4, 8], m_values: vec![1, 3], n_trees: 60, seed: 0 },
        mmd_permutations: 199,
        ..ReductionProtocol::new(mode)
    }
}

#[test]
fn full_cohort_with_strong_signal_is_always_detected() {
    let ds = GaussianShift::cohort_shifted(3.0).sample(1).unwrap();
    let curve = run_reduction(&ds, &quick(ReductionMode::UniformPopulation, vec![1.0], 3, 2)).unwrap();
    for m in Method::ALL {
        assert_eq!(curve.fraction_significant(m, 1.0), Some(1.0), "{m}");
    }
    assert_eq!(curve.records.len(), Method::ALL.len() * 3);
}

#[test]
fn corrected_decisions_imply_raw_ones() {
    for s in 0..3 {
        let ds = GaussianShift::cohort_null().sample(40 + s).unwrap();
        let curve = run_reduction(&ds, &quick(ReductionMode::UniformPopulation, vec![0.9, 0.5], 4, s)).unwrap();
        for f in [0.9, 0.5] {
            let raw = curve.decisions(Method::Mww, f);
            for m in [Method::Bonferroni, Method::Holm, Method::Sidak] {
                for (c, r) in curve.decisions(m, f).iter().zip(&raw) {
                    assert!(!c || *r);
                }
                assert!(curve.fraction_significant(m, f) <= curve.fraction_significant(Method::Mww, f));
            }
        }
    }
}

#[test]
fn univariate_corrections_nest_per_feature() {
    let ds = GaussianShift::cohort_shifted(0.6).sample(8).unwrap();
    let u = univariate(&ds, 0.05).unwrap();
    assert_eq!(u.pvalues.len(), 17);
    for i in 0..17 {
        let bonf = u.correction(Correction::Bonferroni).decisions[i];
        assert!(!bonf || u.correction(Correction::Holm).decisions[i]);
        for c in Correction::ALL {
            assert!(!u.correction(c).decisions[i] || u.raw[i]);
        }
    }
}

#[test]
fn reduction_is_deterministic() {
    let ds = GaussianShift::cohort_shifted(0.8).sample(6).unwrap();
    let proto = quick(ReductionMode::NonfallerOnly, vec![0.8, 0.4], 3, 11);
    let a = run_reduction(&ds, &proto).unwrap();
    let b = run_reduction(&ds, &proto).unwrap();
    assert_eq!(a, b);
    let c = run_reduction(&ds, &ReductionProtocol { seed: 12, ..proto }).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn summary_matches_records() {
    let ds = GaussianShift::cohort_shifted(0.8).sample(7).unwrap();
    let curve = run_reduction(&ds, &quick(ReductionMode::NonfallerOnly, vec![0.7, 0.35], 4, 3)).unwrap();
    assert_eq!(curve.summary.len(), Method::ALL.len() * 2);
    for row in &curve.summary {
        let d = curve.decisions(row.method, row.fraction);
        assert_eq!(d.len(), 4);
        assert_eq!(row.fraction_significant, d.iter().filter(|&&x| x).count() as f64 / 4.0);
    }
}
