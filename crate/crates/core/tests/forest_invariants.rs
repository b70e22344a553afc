use proptest::prelude::*;
use tsauc::forest::{self, Hyperparams, Node};
use tsauc::synth::GaussianShift;
use tsauc::LabeledDataset;

fn cohort(seed: u64) -> LabeledDataset {
    GaussianShift {
        n_pos: 12,
        n_neg: 30,
        dims: 6,
        shifted: 2,
        shift: 1.0,
    }
    .sample(seed)
    .unwrap()
}

fn hp(ls: usize, m: usize, seed: u64) -> Hyperparams {
    Hyperparams {
        leaf_size: ls,
        features_per_tree: m,
        n_trees: 40,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trees_respect_leaf_size_and_feature_subset(seed in 0u64..1000, ls in 1usize..12, m in 1usize..=6) {
        let ds = cohort(seed);
        let model = forest::train(&ds, &hp(ls, m, seed)).unwrap();
        prop_assert_eq!(model.trees().len(), 40);
        for tree in model.trees() {
            prop_assert_eq!(tree.features().len(), m);
            prop_assert_eq!(tree.in_bag_counts().iter().sum::<u32>() as usize, ds.len());
            for node in tree.nodes() {
                match *node {
                    Node::Split { feature, .. } => prop_assert!(tree.uses_feature(feature)),
                    Node::Leaf { count, positive_fraction } => {
                        prop_assert!(count >= ls);
                        prop_assert!((0.0..=1.0).contains(&positive_fraction));
                    }
                }
            }
        }
    }

    #[test]
    fn oob_is_exactly_the_zero_count_rows(seed in 0u64..1000) {
        let ds = cohort(seed);
        let model = forest::train(&ds, &hp(3, 2, seed)).unwrap();
        let oob = forest::oob_posteriors(&model, &ds).unwrap();
        for i in 0..ds.len() {
            let expected = model.trees().iter().filter(|t| t.in_bag_counts()[i] == 0).count();
            prop_assert_eq!(oob.oob_tree_counts[i], expected);
            let direct: f64 = model.trees().iter().filter(|t| t.is_oob(i)).map(|t| t.score(ds.row(i))).sum::<f64>()
                / expected as f64;
            prop_assert!((oob.posteriors[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_does_not_matter(seed in 0u64..1000, shuffle_seed in 0u64..1000) {
        let ds = cohort(seed);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        // deterministic shuffle driven by the proptest input
        let mut rng = tsauc::rng::stream(shuffle_seed, &[]);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let shuffled = ds.subset(&order).unwrap();

        let a = forest::oob_posteriors(&forest::train(&ds, &hp(4, 3, 9)).unwrap(), &ds).unwrap();
        let b = forest::oob_posteriors(&forest::train(&shuffled, &hp(4, 3, 9)).unwrap(), &shuffled).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(&a.ids[i], &b.ids[k]);
            prop_assert_eq!(a.posteriors[i], b.posteriors[k]);
        }
    }
}

#[test]
fn stump_forest_scores_in_bag_prevalence() {
    let ds = cohort(3);
    let n = ds.len();
    let model = forest::train(&ds, &Hyperparams { leaf_size: n, features_per_tree: 2, n_trees: 60, seed: 5 }).unwrap();
    let prevalence: Vec<f64> = model
        .trees()
        .iter()
        .map(|t| {
            let pos: u32 = t.in_bag_counts().iter().zip(ds.labels()).filter(|(_, &l)| l).map(|(c, _)| c).sum();
            pos as f64 / n as f64
        })
        .collect();
    let oob = forest::oob_posteriors(&model, &ds).unwrap();
    for i in 0..n {
        let ts: Vec<f64> = model.trees().iter().zip(&prevalence).filter(|(t, _)| t.is_oob(i)).map(|(_, p)| *p).collect();
        let expected = ts.iter().sum::<f64>() / ts.len() as f64;
        assert!((oob.posteriors[i] - expected).abs() < 1e-12);
    }
    let all = prevalence.iter().sum::<f64>() / prevalence.len() as f64;
    assert!((forest::predict_posterior(&model, ds.row(0)).unwrap() - all).abs() < 1e-12);
}

#[test]
fn training_is_deterministic() {
    let ds = cohort(8);
    let a = forest::train(&ds, &hp(2, 3, 77)).unwrap();
    let b = forest::train(&ds, &hp(2, 3, 77)).unwrap();
    assert_eq!(a, b);
    let c = forest::train(&ds, &hp(2, 3, 78)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn never_oob_probability_is_negligible() {
    // P(in-bag for one tree) = 1 - (1 - 1/n)^n; a subject lacks OOB trees with that to the power N
    let n = 123.0f64;
    let p_in = 1.0 - (1.0 - 1.0 / n).powf(n);
    assert!((p_in - 0.632).abs() < 0.002);
    assert!(p_in.powi(200) < 1e-39);
}

#[test]
fn single_class_dataset_cannot_be_built() {
    let r = LabeledDataset::new(
        (0..5).map(|i| i.to_string()).collect(),
        vec!["a".into()],
        (0..5).map(|i| vec![i as f64]).collect(),
        vec![false; 5],
    );
    assert!(r.is_err());
}
