use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tsauc::synth::GaussianShift;
use tsauc::tsauc::ts_auc_test;
use tsauc::{extract_features, forest, mmd, Hyperparams, SearchSpace};

fn features(c: &mut Criterion) {
    let s = tsauc_bench::walk(25.0, 60.0);
    c.bench_function("extract_features/60s@25Hz", |b| b.iter(|| extract_features(black_box(&s)).unwrap()));
}

fn forest_train(c: &mut Criterion) {
    let ds = GaussianShift::cohort_shifted(1.0).sample(1).unwrap();
    let hp = Hyperparams { leaf_size: 8, features_per_tree: 4, n_trees: 200, seed: 1 };
    c.bench_function("forest/train+oob 200 trees", |b| {
        b.iter(|| {
            let m = forest::train(black_box(&ds), &hp).unwrap();
            forest::oob_posteriors(&m, &ds).unwrap()
        })
    });
}

fn tsauc_grid(c: &mut Criterion) {
    let ds = GaussianShift::cohort_shifted(1.0).sample(2).unwrap();
    let space = SearchSpace { seed: 2, ..SearchSpace::default() };
    let mut g = c.benchmark_group("tsauc");
    g.sample_size(10);
    g.bench_function("default grid", |b| b.iter(|| ts_auc_test(black_box(&ds), &space).unwrap()));
    g.finish();
}

fn mmd_perm(c: &mut Criterion) {
    let ds = GaussianShift::cohort_shifted(0.5).sample(3).unwrap();
    c.bench_function("mmd/1000 permutations", |b| b.iter(|| mmd::mmd_test(black_box(&ds), 1000, 3).unwrap()));
}

criterion_group!(benches, features, forest_train, tsauc_grid, mmd_perm);
criterion_main!(benches);
