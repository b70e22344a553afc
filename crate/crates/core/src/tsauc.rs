//! The ts-AUC two-sample test and its out-of-bag feature importance.
//!
//! The test explores a grid of forest hyperparameters (leaf size LS, features
//! per tree M), scores every configuration by the AUC of its OOB posteriors,
//! retrains the best configuration (the star model) with a fresh seed, and
//! applies a one-sided Mann-Whitney-Wilcoxon test to the star model's OOB
//! posteriors: `H0: AUC* = 1/2` against `H1: AUC* > 1/2`.
//!
//! Seeds: grid point `(LS, M)` trains with `derive_seed(seed, [1, LS, M])`
//! and the star model with `derive_seed(seed, [2])`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::forest::{self, ForestModel, Hyperparams, OobScores, Presorted};
use crate::rank_stats::{self, Alternative, GroupedScores};
use crate::rng;

const GRID_STREAM: u64 = 1;
const STAR_STREAM: u64 = 2;
const SIZE_STREAM: u64 = 3;
const PERMUTE_STREAM: u64 = 4;

/// Number of trees used by default.
pub const DEFAULT_TREES: usize = 200;
/// Default runs per model size in [`select_model_size`].
pub const DEFAULT_SIZE_RUNS: usize = 20;

/// Hyperparameter grid explored by [`ts_auc_test`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ls_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub n_trees: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    /// Shallow (7 < LS < 20) and simple (M < 9) trees, 200 per forest.
    fn default() -> Self {
        SearchSpace {
            ls_values: (8..=19).collect(),
            m_values: (1..=8).collect(),
            n_trees: DEFAULT_TREES,
            seed: 0,
        }
    }
}

impl SearchSpace {
    /// Grid points usable on `n_features` features, LS-major.
    ///
    /// `M` values above the feature count are skipped.
    pub fn grid(&self, n_features: usize) -> Vec<(usize, usize)> {
        self.ls_values
            .iter()
            .flat_map(|&ls| {
                self.m_values
                    .iter()
                    .filter(move |&&m| m <= n_features)
                    .map(move |&m| (ls, m))
            })
            .collect()
    }
}

/// OOB AUC of one grid configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub ls: usize,
    pub m: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsAucResult {
    /// Largest OOB AUC over the grid.
    pub auc_star: f64,
    /// Hyperparameters of the retrained star model.
    pub best_hp: Hyperparams,
    /// OOB posteriors of the retrained star model.
    pub oob_scores: OobScores,
    /// OOB AUC of the retrained star model.
    pub star_model_auc: f64,
    /// One-sided MWW p-value on the star model's OOB posteriors.
    pub p_value: f64,
    pub auc_grid: Vec<GridPoint>,
}

impl TsAucResult {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// OOB AUC of a trained forest, `U / (n_pos * n_neg)`.
pub fn oob_auc(scores: &OobScores) -> Result<f64> {
    let g = GroupedScores::from_labels(&scores.posteriors, &scores.labels)?;
    Ok(rank_stats::auc(&g))
}

fn grid_auc(view: &Presorted, ds: &LabeledDataset, hp: &Hyperparams) -> Result<f64> {
    let model = forest::train_presorted(view, hp)?;
    oob_auc(&forest::oob_posteriors(&model, ds)?)
}

/// Runs the ts-AUC test.
pub fn ts_auc_test(ds: &LabeledDataset, space: &SearchSpace) -> Result<TsAucResult> {
    if ds.n_pos() < 2 || ds.n_neg() < 2 {
        return Err(Error::Infeasible(format!(
            "ts-AUC needs at least 2 subjects per group, got {} and {}",
            ds.n_pos(),
            ds.n_neg()
        )));
    }
    let grid = space.grid(ds.n_features());
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "search space has no usable (LS, M) point for {} features",
            ds.n_features()
        )));
    }
    let view = Presorted::new(ds);
    let auc_grid = grid
        .par_iter()
        .map(|&(ls, m)| {
            let hp = Hyperparams {
                leaf_size: ls,
                features_per_tree: m,
                n_trees: space.n_trees,
                seed: rng::derive_seed(space.seed, &[GRID_STREAM, ls as u64, m as u64]),
            };
            grid_auc(&view, ds, &hp).map(|auc| GridPoint { ls, m, auc })
        })
        .collect::<Result<Vec<_>>>()?;

    // Highest AUC; ties go to the simpler model (smaller M, then larger LS).
    let best = auc_grid
        .iter()
        .copied()
        .reduce(|a, b| {
            let better = b.auc > a.auc || (b.auc == a.auc && (b.m < a.m || (b.m == a.m && b.ls > a.ls)));
            if better {
                b
            } else {
                a
            }
        })
        .expect("grid is non-empty");

    let best_hp = Hyperparams {
        leaf_size: best.ls,
        features_per_tree: best.m,
        n_trees: space.n_trees,
        seed: rng::derive_seed(space.seed, &[STAR_STREAM]),
    };
    let star = forest::train_presorted(&view, &best_hp)?;
    let oob_scores = forest::oob_posteriors(&star, ds)?;
    let grouped = GroupedScores::from_labels(&oob_scores.posteriors, &oob_scores.labels)?;
    let star_model_auc = rank_stats::auc(&grouped);
    let p_value = rank_stats::mww_pvalue(&grouped, Alternative::Greater);

    Ok(TsAucResult {
        auc_star: best.auc,
        best_hp,
        oob_scores,
        star_model_auc,
        p_value,
        auc_grid,
    })
}

/// OOB permutation importance of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean increase of the OOB error after permuting the feature.
    pub d: f64,
    /// Standard deviation of that increase across trees.
    pub sigma: f64,
    /// `d / sigma`; `None` when fewer than two trees used the feature.
    pub importance: Option<f64>,
    /// Trees that were allowed to split on the feature and had OOB subjects.
    pub n_trees: usize,
    /// Set when `sigma` is zero and the importance was reported as 0.
    pub zero_spread: bool,
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn misclassified(score: f64, label: bool) -> bool {
    (score > 0.5) != label
}

/// OOB permutation importance with random permutations.
///
/// For every tree and every feature it was allowed to use, the feature's
/// values are shuffled among the tree's OOB subjects and the change in the
/// tree's 0-1 OOB error (threshold 0.5) is recorded. `d_j` and `sigma_j`
/// summarize the changes over the trees that used feature `j`.
pub fn permutation_importance(
    model: &ForestModel,
    ds: &LabeledDataset,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    permutation_importance_by(model, ds, |tree, feature, order| {
        let mut rng = rng::stream(seed, &[PERMUTE_STREAM, tree as u64, feature as u64]);
        order.shuffle(&mut rng);
    })
}

/// [`permutation_importance`] with a caller-supplied permutation of each
/// tree's OOB rows: `permute(tree, feature, rows)` reorders `rows` in place.
pub fn permutation_importance_by<P>(
    model: &ForestModel,
    ds: &LabeledDataset,
    permute: P,
) -> Result<Vec<FeatureImportance>>
where
    P: Fn(usize, usize, &mut [usize]) + Sync,
{
    forest::check_alignment(model, ds)?;
    let d = ds.n_features();
    let per_tree: Vec<Vec<(usize, f64)>> = model
        .trees()
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let oob: Vec<usize> = tree.oob_rows().collect();
            if oob.is_empty() {
                return Vec::new();
            }
            let n_oob = oob.len() as f64;
            let base_errors = oob
                .iter()
                .filter(|&&i| misclassified(tree.score(ds.row(i)), ds.labels()[i]))
                .count();
            tree.features()
                .iter()
                .map(|&j| {
                    let mut donors = oob.clone();
                    permute(t, j, &mut donors);
                    let errors = oob
                        .iter()
                        .zip(&donors)
                        .filter(|(&i, &donor)| {
                            let row = ds.row(i);
                            let donated = ds.row(donor)[j];
                            let score = tree.score_with(|f| if f == j { donated } else { row[f] });
                            misclassified(score, ds.labels()[i])
                        })
                        .count();
                    (j, (errors as f64 - base_errors as f64) / n_oob)
                })
                .collect()
        })
        .collect();

    let mut increases: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (j, delta) in per_tree.into_iter().flatten() {
        increases[j].push(delta);
    }
    Ok(increases
        .iter()
        .enumerate()
        .map(|(j, inc)| {
            let (mean, sigma) = mean_std(inc);
            let (importance, zero_spread) = if inc.len() < 2 {
                (None, false)
            } else if sigma > 0.0 {
                (Some(mean / sigma), false)
            } else {
                (Some(0.0), true)
            };
            FeatureImportance {
                feature: ds.feature_names()[j].clone(),
                d: mean,
                sigma,
                importance,
                n_trees: inc.len(),
                zero_spread,
            }
        })
        .collect())
}

/// Feature indices by descending importance; undefined importances last,
/// ties by index.
pub fn importance_ranking(importances: &[FeatureImportance]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| match (importances[a].importance, importances[b].importance) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    order
}

/// Mean and spread of the OOB AUC of forests on the top-`k` features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSizePoint {
    pub k: usize,
    pub mean_auc: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSizeSelection {
    pub curve: Vec<ModelSizePoint>,
    pub selected_feature_count: usize,
}

/// Chooses how many top-ranked features to keep.
///
/// Forests on the top `k` features (for `k = 1..=D`) are trained `runs` times
/// each with `M = min(hp.M, k)`. The selection is the smallest `k` whose mean
/// OOB AUC reaches the best mean minus the standard deviation at the best
/// `k`. Run `r` uses the same seed for every `k`.
pub fn select_model_size(
    ds: &LabeledDataset,
    hp: &Hyperparams,
    ranking: &[usize],
    runs: usize,
) -> Result<ModelSizeSelection> {
    let d = ds.n_features();
    let mut seen = vec![false; d];
    if ranking.len() != d || ranking.iter().any(|&j| j >= d || std::mem::replace(&mut seen[j], true)) {
        return Err(Error::InvalidArgument("ranking must be a permutation of all features".into()));
    }
    if runs == 0 {
        return Err(Error::InvalidArgument("model-size selection needs at least one run".into()));
    }
    let curve = (1..=d)
        .map(|k| {
            let sub = ds.select_features(&ranking[..k])?;
            let view = Presorted::new(&sub);
            let aucs = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let run_hp = Hyperparams {
                        features_per_tree: hp.features_per_tree.min(k),
                        seed: rng::derive_seed(hp.seed, &[SIZE_STREAM, r as u64]),
                        ..*hp
                    };
                    grid_auc(&view, &sub, &run_hp)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_auc, std) = mean_std(&aucs);
            Ok(ModelSizePoint { k, mean_auc, std })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = curve
        .iter()
        .reduce(|a, b| if b.mean_auc > a.mean_auc { b } else { a })
        .expect("at least one feature");
    let bar = best.mean_auc - best.std;
    let selected_feature_count = curve
        .iter()
        .find(|p| p.mean_auc >= bar)
        .map(|p| p.k)
        .unwrap_or(best.k);
    Ok(ModelSizeSelection {
        curve,
        selected_feature_count,
    })
}

/// Importances, ranking and model-size selection for one hyperparameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    pub ranking: Vec<usize>,
    pub model_size_curve: Vec<ModelSizePoint>,
    pub selected_feature_count: usize,
}

/// Trains a forest with `hp`, measures permutation importance and selects the
/// model size over `runs` repetitions.
pub fn importance_report(ds: &LabeledDataset, hp: &Hyperparams, runs: usize) -> Result<ImportanceReport> {
    let model = forest::train(ds, hp)?;
    let features = permutation_importance(&model, ds, hp.seed)?;
    let ranking = importance_ranking(&features);
    let selection = select_model_size(ds, hp, &ranking, runs)?;
    Ok(ImportanceReport {
        features,
        ranking,
        model_size_curve: selection.curve,
        selected_feature_count: selection.selected_feature_count,
    })
}
