//! Binary random forest with bootstrap bagging and out-of-bag bookkeeping.
//!
//! Each tree draws a bootstrap sample of size `n` and a subset of `M`
//! features, once per tree, and grows a CART tree on it with Gini splits and a
//! minimum leaf size. Thresholds sit halfway between consecutive unique values
//! of the training column. A leaf scores a subject with the fraction of in-bag
//! positives it holds (bootstrap multiplicity counted). Subjects a tree never
//! saw are out-of-bag (OOB) for it; averaging leaf fractions over those trees
//! gives each subject an honest posterior.
//!
//! Randomness is drawn per tree from a stream keyed by `(seed, tree index)`,
//! and bootstrap positions refer to subjects sorted by id, so the model does
//! not depend on thread scheduling or on the row order of the input.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Forest hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Minimum number of in-bag samples per leaf (LS).
    pub leaf_size: usize,
    /// Features drawn for each tree (M).
    pub features_per_tree: usize,
    /// Number of trees (N).
    pub n_trees: usize,
    pub seed: u64,
}

impl Hyperparams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.leaf_size == 0 {
            return Err(Error::InvalidArgument("leaf size must be at least 1".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if self.features_per_tree == 0 || self.features_per_tree > n_features {
            return Err(Error::InvalidArgument(format!(
                "features per tree must lie in 1..={n_features}, got {}",
                self.features_per_tree
            )));
        }
        Ok(())
    }
}

/// A tree node. Samples with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
        /// In-bag samples reaching the leaf, bootstrap multiplicity included.
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    features: Vec<usize>,
    in_bag: Vec<u32>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Features this tree was allowed to split on, ascending.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.features.binary_search(&j).is_ok()
    }

    /// Bootstrap multiplicity of each training row, in dataset row order.
    pub fn in_bag_counts(&self) -> &[u32] {
        &self.in_bag
    }

    pub fn is_oob(&self, row: usize) -> bool {
        self.in_bag[row] == 0
    }

    pub fn oob_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_bag
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
    }

    /// Leaf positive fraction for a subject whose feature `j` is `value(j)`.
    pub fn score_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if value(feature) <= threshold { left } else { right },
                Node::Leaf {
                    positive_fraction, ..
                } => return positive_fraction,
            }
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.score_with(|j| row[j])
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf {
                positive_fraction,
                count,
            } => Some((positive_fraction, count)),
            Node::Split { .. } => None,
        })
    }
}

/// A trained forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    hyperparams: Hyperparams,
    n_features: usize,
    n_train: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }
}

/// Per-subject OOB posteriors, aligned with the training dataset's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobScores {
    pub ids: Vec<String>,
    pub labels: Vec<bool>,
    pub posteriors: Vec<f64>,
    pub oob_tree_counts: Vec<usize>,
}

impl OobScores {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Column-major view of a dataset with per-feature dense ranks, shared by
/// every forest trained on the same data.
#[derive(Debug, Clone)]
pub struct Presorted {
    n: usize,
    /// canonical position -> dataset row
    canonical: Vec<usize>,
    /// labels by canonical position
    labels: Vec<bool>,
    /// `ranks[j][p]`: dense rank of canonical subject `p` on feature `j`
    ranks: Vec<Vec<u32>>,
    /// `uniques[j][r]`: value of rank `r` on feature `j`
    uniques: Vec<Vec<f64>>,
}

impl Presorted {
    pub fn new(ds: &LabeledDataset) -> Self {
        let canonical = ds.canonical_order();
        let n = ds.len();
        let labels = canonical.iter().map(|&i| ds.labels()[i]).collect();
        let mut ranks = Vec::with_capacity(ds.n_features());
        let mut uniques = Vec::with_capacity(ds.n_features());
        for j in 0..ds.n_features() {
            let values: Vec<f64> = canonical.iter().map(|&i| ds.row(i)[j]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let mut r = vec![0u32; n];
            let mut u: Vec<f64> = Vec::new();
            for &p in &order {
                if u.last() != Some(&values[p]) {
                    u.push(values[p]);
                }
                r[p] = (u.len() - 1) as u32;
            }
            ranks.push(r);
            uniques.push(u);
        }
        Presorted {
            n,
            canonical,
            labels,
            ranks,
            uniques,
        }
    }

    pub fn n_features(&self) -> usize {
        self.ranks.len()
    }
}

/// Trains a forest on `ds`.
pub fn train(ds: &LabeledDataset, hp: &Hyperparams) -> Result<ForestModel> {
    train_presorted(&Presorted::new(ds), hp)
}

/// Trains a forest from a precomputed [`Presorted`] view.
pub fn train_presorted(view: &Presorted, hp: &Hyperparams) -> Result<ForestModel> {
    hp.validate(view.n_features())?;
    let n_pos = view.labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == view.n {
        return Err(Error::Infeasible("cannot train on a single-class dataset".into()));
    }
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(view, hp, t))
        .collect();
    Ok(ForestModel {
        trees,
        hyperparams: *hp,
        n_features: view.n_features(),
        n_train: view.n,
    })
}

/// In-bag sample: canonical position and bootstrap multiplicity.
#[derive(Clone, Copy)]
struct Bagged {
    pos: u32,
    weight: u32,
}

struct SplitChoice {
    score: f64,
    feature: usize,
    /// samples with rank <= `rank` go left
    rank: u32,
    next_rank: u32,
}

fn grow_tree(view: &Presorted, hp: &Hyperparams, tree_index: usize) -> Tree {
    let n = view.n;
    let mut rng = rng::stream(hp.seed, &[tree_index as u64]);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let mut features = index::sample(&mut rng, view.n_features(), hp.features_per_tree).into_vec();
    features.sort_unstable();

    let mut bag: Vec<Bagged> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(p, &c)| Bagged {
            pos: p as u32,
            weight: c,
        })
        .collect();

    let mut nodes = Vec::new();
    let mut scratch = Vec::with_capacity(bag.len());
    // (range start, range end, node slot)
    let mut stack = vec![(0usize, bag.len(), 0usize)];
    nodes.push(Node::Leaf {
        positive_fraction: 0.0,
        count: 0,
    });
    while let Some((start, end, slot)) = stack.pop() {
        let samples = &mut bag[start..end];
        let (total, positives) = samples.iter().fold((0u64, 0u64), |(t, p), s| {
            let w = s.weight as u64;
            (t + w, if view.labels[s.pos as usize] { p + w } else { p })
        });
        let leaf = Node::Leaf {
            positive_fraction: positives as f64 / total as f64,
            count: total as usize,
        };
        let ls = hp.leaf_size as u64;
        if positives == 0 || positives == total || total < 2 * ls {
            nodes[slot] = leaf;
            continue;
        }
        let Some(choice) = best_split(view, samples, &features, total, positives, ls, &mut scratch)
        else {
            nodes[slot] = leaf;
            continue;
        };
        let ranks = &view.ranks[choice.feature];
        let mut mid = 0;
        for i in 0..samples.len() {
            if ranks[samples[i].pos as usize] <= choice.rank {
                samples.swap(i, mid);
                mid += 1;
            }
        }
        // Cut at the middle rank of the in-bag gap, between consecutive unique
        // values of the whole training column, so routing of every training
        // row depends on value order only.
        let uniq = &view.uniques[choice.feature];
        let cut = ((choice.rank + choice.next_rank) / 2) as usize;
        let threshold = 0.5 * (uniq[cut] + uniq[cut + 1]);
        let left = nodes.len();
        let right = left + 1;
        let placeholder = Node::Leaf {
            positive_fraction: 0.0,
            count: 0,
        };
        nodes.push(placeholder.clone());
        nodes.push(placeholder);
        nodes[slot] = Node::Split {
            feature: choice.feature,
            threshold,
            left,
            right,
        };
        stack.push((start + mid, end, right));
        stack.push((start, start + mid, left));
    }

    let mut in_bag = vec![0u32; n];
    for (p, &c) in counts.iter().enumerate() {
        in_bag[view.canonical[p]] = c;
    }
    Tree {
        nodes,
        features,
        in_bag,
    }
}

/// Best Gini split of `samples` over `features`; `None` when no admissible
/// split lowers the impurity. Ties go to the lowest feature, then the lowest
/// threshold.
fn best_split(
    view: &Presorted,
    samples: &[Bagged],
    features: &[usize],
    total: u64,
    positives: u64,
    ls: u64,
    scratch: &mut Vec<(u32, Bagged)>,
) -> Option<SplitChoice> {
    let n_total = total as f64;
    let negatives = total - positives;
    let parent = (positives * positives + negatives * negatives) as f64 / n_total;
    let mut best: Option<SplitChoice> = None;
    for &j in features {
        let ranks = &view.ranks[j];
        scratch.clear();
        scratch.extend(samples.iter().map(|s| (ranks[s.pos as usize], *s)));
        scratch.sort_unstable_by_key(|(r, _)| *r);
        let (mut left_n, mut left_pos) = (0u64, 0u64);
        for i in 0..scratch.len() - 1 {
            let (r, s) = scratch[i];
            let w = s.weight as u64;
            left_n += w;
            if view.labels[s.pos as usize] {
                left_pos += w;
            }
            let next_r = scratch[i + 1].0;
            if next_r == r {
                continue;
            }
            let right_n = total - left_n;
            if left_n < ls {
                continue;
            }
            if right_n < ls {
                break;
            }
            let left_neg = left_n - left_pos;
            let right_pos = positives - left_pos;
            let right_neg = right_n - right_pos;
            // Gini decrease times n_total: sum over children of (p^2 + q^2) / n, minus the parent's.
            let score = (left_pos * left_pos + left_neg * left_neg) as f64 / left_n as f64
                + (right_pos * right_pos + right_neg * right_neg) as f64 / right_n as f64
                - parent;
            if score > 1e-12 * n_total && best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(SplitChoice {
                    score,
                    feature: j,
                    rank: r,
                    next_rank: next_r,
                });
            }
        }
    }
    best
}

/// OOB posteriors of every training subject.
///
/// Fails with [`Error::NoOobTrees`] if some subject was in-bag for all trees.
pub fn oob_posteriors(model: &ForestModel, ds: &LabeledDataset) -> Result<OobScores> {
    check_alignment(model, ds)?;
    let n = ds.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for tree in &model.trees {
        for i in tree.oob_rows() {
            sums[i] += tree.score(ds.row(i));
            counts[i] += 1;
        }
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::NoOobTrees {
            subject_id: ds.ids()[i].clone(),
        });
    }
    Ok(OobScores {
        ids: ds.ids().to_vec(),
        labels: ds.labels().to_vec(),
        posteriors: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
        oob_tree_counts: counts,
    })
}

/// Mean leaf positive fraction over all trees.
pub fn predict_posterior(model: &ForestModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::InvalidArgument(format!(
            "row has {} features, model expects {}",
            x.len(),
            model.n_features
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("row contains non-finite values".into()));
    }
    let sum: f64 = model.trees.iter().map(|t| t.score(x)).sum();
    Ok(sum / model.trees.len() as f64)
}

pub(crate) fn check_alignment(model: &ForestModel, ds: &LabeledDataset) -> Result<()> {
    if model.n_train != ds.len() || model.n_features != ds.n_features() {
        return Err(Error::InvalidArgument(format!(
            "model was trained on {}x{} data, got {}x{}",
            model.n_train,
            model.n_features,
            ds.len(),
            ds.n_features()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> LabeledDataset {
        LabeledDataset::new(
            (0..n).map(|i| format!("s{i:02}")).collect(),
            vec!["x".into()],
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| i >= n / 2).collect(),
        )
        .unwrap()
    }

    fn hp(ls: usize, m: usize, n: usize) -> Hyperparams {
        Hyperparams {
            leaf_size: ls,
            features_per_tree: m,
            n_trees: n,
            seed: 17,
        }
    }

    #[test]
    fn separable_trees_split_between_classes() {
        let ds = separable(10);
        let model = train(&ds, &hp(1, 1, 20)).unwrap();
        for tree in model.trees() {
            let bag = tree.in_bag_counts();
            let max_neg = (0..5).filter(|&i| bag[i] > 0).max().unwrap() as f64;
            let min_pos = (5..10).filter(|&i| bag[i] > 0).min().unwrap() as f64;
            match tree.nodes()[0] {
                Node::Split { threshold, .. } => {
                    let cut = ((max_neg + min_pos) / 2.0).floor();
                    assert_eq!(threshold, cut + 0.5);
                    assert_eq!(tree.nodes().len(), 3);
                }
                Node::Leaf { .. } => panic!("root should split"),
            }
        }
        for (i, row) in ds.rows().iter().enumerate() {
            let p = predict_posterior(&model, row).unwrap();
            assert_eq!(p > 0.5, ds.labels()[i]);
        }
    }

    #[test]
    fn full_leaf_size_gives_stumps() {
        let ds = separable(10);
        let model = train(&ds, &hp(10, 1, 30)).unwrap();
        for tree in model.trees() {
            assert_eq!(tree.nodes().len(), 1);
            let bag = tree.in_bag_counts();
            let pos: u32 = bag.iter().zip(ds.labels()).filter(|(_, &l)| l).map(|(c, _)| c).sum();
            let (frac, count) = tree.leaves().next().unwrap();
            assert_eq!(count, 10);
            assert_eq!(frac, pos as f64 / 10.0);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let ds = separable(12);
        let a = train(&ds, &hp(2, 1, 15)).unwrap();
        let b = train(&ds, &hp(2, 1, 15)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_hyperparams() {
        let ds = separable(10);
        assert!(matches!(train(&ds, &hp(1, 2, 5)), Err(Error::InvalidArgument(_))));
        assert!(train(&ds, &hp(0, 1, 5)).is_err());
        assert!(train(&ds, &hp(1, 1, 0)).is_err());
    }

    #[test]
    fn too_few_trees_leaves_subject_without_oob() {
        let ds = separable(10);
        let model = train(&ds, &hp(1, 1, 1)).unwrap();
        match oob_posteriors(&model, &ds) {
            Err(Error::NoOobTrees { subject_id }) => assert!(subject_id.starts_with('s')),
            other => panic!("expected NoOobTrees, got {other:?}"),
        }
    }

    #[test]
    fn separable_oob_ranks_positives_higher() {
        let ds = separable(10);
        let model = train(&ds, &hp(1, 1, 20)).unwrap();
        let oob = oob_posteriors(&model, &ds).unwrap();
        let mean = |want: bool| {
            let v: Vec<f64> = oob.posteriors.iter().zip(&oob.labels).filter(|(_, &l)| l == want).map(|(p, _)| *p).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > mean(false));
    }

    #[test]
    fn deep_positive_row_scores_high() {
        let ds = separable(10);
        let model = train(&ds, &hp(1, 1, 50)).unwrap();
        assert!(predict_posterior(&model, &[100.0]).unwrap() > 0.9);
        assert!(predict_posterior(&model, &[1.0, 2.0]).is_err());
    }
}
