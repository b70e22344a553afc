//! Maximum Mean Discrepancy two-sample test.
//!
//! Unbiased squared MMD with a Gaussian kernel on standardized features. The
//! bandwidth is the median pairwise distance of the pooled sample and the null
//! distribution comes from label permutations.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Smallest permutation count accepted by [`mmd_test`].
pub const MIN_PERMUTATIONS: usize = 99;
/// Default permutation count.
pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    pub mmd2_u: f64,
    /// `(1 + #{permuted >= observed}) / (1 + n_permutations)`
    pub p_value: f64,
    pub bandwidth: f64,
    pub n_permutations: usize,
}

impl MmdResult {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pooled z-scores of every column. Constant columns become zeros.
pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut out = rows.to_vec();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        let sd = var.sqrt();
        for r in out.iter_mut() {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
    }
    d2
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Gaussian kernel matrix `exp(-|a - b|^2 / (2 h^2))` (row-major, `n x n`).
pub fn gaussian_kernel(points: &[Vec<f64>], bandwidth: f64) -> Vec<f64> {
    squared_distances(points)
        .into_iter()
        .map(|d2| (-d2 / (2.0 * bandwidth * bandwidth)).exp())
        .collect()
}

/// Median pairwise Euclidean distance.
pub fn median_heuristic(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d2 = squared_distances(points);
    let dists = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[i * n + j].sqrt())
        .collect();
    median(dists)
}

/// Unbiased MMD² of the groups marked by `labels` under kernel matrix `k`.
pub fn mmd2_unbiased(k: &[f64], labels: &[bool]) -> f64 {
    let n = labels.len();
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = &k[i * n..(i + 1) * n];
        for j in (i + 1)..n {
            match (labels[i], labels[j]) {
                (true, true) => sxx += row[j],
                (false, false) => syy += row[j],
                _ => sxy += row[j],
            }
        }
    }
    let m = labels.iter().filter(|&&l| l).count() as f64;
    let q = n as f64 - m;
    // off-diagonal sums count each unordered pair once
    2.0 * sxx / (m * (m - 1.0)) + 2.0 * syy / (q * (q - 1.0)) - 2.0 * sxy / (m * q)
}

/// Runs the permutation MMD test.
pub fn mmd_test(ds: &LabeledDataset, n_permutations: usize, seed: u64) -> Result<MmdResult> {
    if ds.n_pos() < 2 || ds.n_neg() < 2 {
        return Err(Error::Infeasible(format!(
            "MMD needs at least 2 subjects per group, got {} and {}",
            ds.n_pos(),
            ds.n_neg()
        )));
    }
    if n_permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "MMD needs at least {MIN_PERMUTATIONS} permutations, got {n_permutations}"
        )));
    }
    let z = standardize(ds.rows());
    let bandwidth = median_heuristic(&z);
    if bandwidth <= 0.0 {
        return Err(Error::Infeasible("median pairwise distance is zero".into()));
    }
    let k = gaussian_kernel(&z, bandwidth);
    let observed = mmd2_unbiased(&k, ds.labels());

    let exceed = (0..n_permutations)
        .into_par_iter()
        .map(|b| {
            let mut labels = ds.labels().to_vec();
            labels.shuffle(&mut rng::stream(seed, &[b as u64]));
            usize::from(mmd2_unbiased(&k, &labels) >= observed)
        })
        .sum::<usize>();

    Ok(MmdResult {
        mmd2_u: observed,
        p_value: (1 + exceed) as f64 / (1 + n_permutations) as f64,
        bandwidth,
        n_permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_mmd(x: &[Vec<f64>], y: &[Vec<f64>], h: f64) -> f64 {
        let k = |a: &[f64], b: &[f64]| {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
            (-d2 / (2.0 * h * h)).exp()
        };
        let (m, n) = (x.len() as f64, y.len() as f64);
        let mut xx = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if i != j {
                    xx += k(&x[i], &x[j]);
                }
            }
        }
        let mut yy = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if i != j {
                    yy += k(&y[i], &y[j]);
                }
            }
        }
        let xy: f64 = x.iter().flat_map(|a| y.iter().map(move |b| k(a, b))).sum();
        xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
    }

    #[test]
    fn statistic_matches_direct_sums() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.3, (i * i) as f64 * 0.05]).collect();
        let labels: Vec<bool> = (0..9).map(|i| i % 3 == 0).collect();
        let h = 0.8;
        let k = gaussian_kernel(&pts, h);
        let x: Vec<Vec<f64>> = pts.iter().zip(&labels).filter(|(_, &l)| l).map(|(p, _)| p.clone()).collect();
        let y: Vec<Vec<f64>> = pts.iter().zip(&labels).filter(|(_, &l)| !l).map(|(p, _)| p.clone()).collect();
        let direct = naive_mmd(&x, &y, h);
        assert!((mmd2_unbiased(&k, &labels) - direct).abs() < 1e-12);
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        assert!((mmd2_unbiased(&k, &flipped) - direct).abs() < 1e-12);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn identical_points_error() {
        let ds = LabeledDataset::new(
            (0..6).map(|i| i.to_string()).collect(),
            vec!["a".into()],
            vec![vec![1.0]; 6],
            vec![true, true, true, false, false, false],
        )
        .unwrap();
        assert!(matches!(mmd_test(&ds, 99, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn permutation_floor() {
        let ds = LabeledDataset::new(
            (0..6).map(|i| i.to_string()).collect(),
            vec!["a".into()],
            (0..6).map(|i| vec![i as f64]).collect(),
            vec![true, true, true, false, false, false],
        )
        .unwrap();
        assert!(mmd_test(&ds, 50, 0).is_err());
        let r = mmd_test(&ds, 99, 0).unwrap();
        assert!(r.p_value >= 1.0 / 100.0 && r.p_value <= 1.0);
    }
}
