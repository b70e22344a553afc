//! Rank statistics: Mann-Whitney U, empirical AUC, Mann-Whitney-Wilcoxon
//! p-values and family-wise corrections.
//!
//! Ties receive half credit (midranks) throughout, which makes
//! `U(pos, neg) + U(neg, pos) = n_pos * n_neg` hold exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest pooled sample size for which [`mww_pvalue`] uses the exact null.
pub const EXACT_MAX_N: usize = 12;

/// Scores of the positive (faller) and negative (non-faller) groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedScores {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl GroupedScores {
    pub fn new(pos: Vec<f64>, neg: Vec<f64>) -> Result<Self> {
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::InvalidArgument("both score groups must be non-empty".into()));
        }
        if pos.iter().chain(&neg).any(|v| !v.is_finite()) {
            return Err(Error::Validation("scores must be finite".into()));
        }
        Ok(GroupedScores { pos, neg })
    }

    /// Splits `scores` by `labels` (`true` = positive group).
    pub fn from_labels(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let (pos, neg): (Vec<_>, Vec<_>) = scores.iter().zip(labels).partition(|(_, &l)| l);
        GroupedScores::new(
            pos.into_iter().map(|(s, _)| *s).collect(),
            neg.into_iter().map(|(s, _)| *s).collect(),
        )
    }

    pub fn pos(&self) -> &[f64] {
        &self.pos
    }

    pub fn neg(&self) -> &[f64] {
        &self.neg
    }

    pub fn swapped(&self) -> Self {
        GroupedScores {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }

    /// Midranks of the pooled sample (positives first) and the tie group sizes.
    fn pooled_ranks(&self) -> (Vec<f64>, Vec<usize>) {
        let pooled: Vec<f64> = self.pos.iter().chain(&self.neg).copied().collect();
        let mut order: Vec<usize> = (0..pooled.len()).collect();
        order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
        let mut ranks = vec![0.0; pooled.len()];
        let mut ties = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() && pooled[order[j]] == pooled[order[i]] {
                j += 1;
            }
            // ranks are 1-based: positions i..j share the mean rank
            let midrank = (i + j + 1) as f64 / 2.0;
            for &k in &order[i..j] {
                ranks[k] = midrank;
            }
            if j - i > 1 {
                ties.push(j - i);
            }
            i = j;
        }
        (ranks, ties)
    }

    fn has_ties(&self) -> bool {
        !self.pooled_ranks().1.is_empty()
    }
}

/// Alternative hypothesis of a Mann-Whitney-Wilcoxon test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// The positive group is stochastically larger.
    Greater,
    TwoSided,
}

/// Mann-Whitney U of the positive group: the number of (pos, neg) pairs with
/// the positive score larger, ties counting one half.
pub fn u_statistic(g: &GroupedScores) -> f64 {
    let (ranks, _) = g.pooled_ranks();
    let n_pos = g.pos.len() as f64;
    let rank_sum: f64 = ranks[..g.pos.len()].iter().sum();
    rank_sum - n_pos * (n_pos + 1.0) / 2.0
}

/// Empirical AUC, `u / (n_pos * n_neg)`.
pub fn auc_from_u(u: f64, n_pos: usize, n_neg: usize) -> f64 {
    debug_assert!(n_pos > 0 && n_neg > 0);
    u / (n_pos as f64 * n_neg as f64)
}

/// Empirical AUC of a scored two-group sample.
pub fn auc(g: &GroupedScores) -> f64 {
    auc_from_u(u_statistic(g), g.pos.len(), g.neg.len())
}

/// Null distribution of U for tie-free samples: `counts[u]` is the number of
/// the `C(n_pos + n_neg, n_pos)` equally likely group assignments producing U = u.
pub fn exact_u_counts(n_pos: usize, n_neg: usize) -> Vec<f64> {
    // counts for (a, b) obtained from (a-1, b) shifted by b and (a, b-1):
    // the largest element is either a positive (beating all b negatives) or a negative.
    let max_u = n_pos * n_neg;
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_neg + 1]; n_pos + 1];
    for a in 0..=n_pos {
        for b in 0..=n_neg {
            let mut c = vec![0.0; a * b + 1];
            if a == 0 || b == 0 {
                c[0] = 1.0;
            } else {
                for (u, slot) in c.iter_mut().enumerate() {
                    let from_pos = if u >= b { table[a - 1][b].get(u - b).copied().unwrap_or(0.0) } else { 0.0 };
                    let from_neg = table[a][b - 1].get(u).copied().unwrap_or(0.0);
                    *slot = from_pos + from_neg;
                }
            }
            table[a][b] = c;
        }
    }
    let out = std::mem::take(&mut table[n_pos][n_neg]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

/// Exact p-value from the permutation distribution of U.
///
/// Valid for tie-free samples of any size; [`mww_pvalue`] only routes small
/// samples here.
pub fn exact_pvalue(g: &GroupedScores, alternative: Alternative) -> f64 {
    let u = u_statistic(g);
    let counts = exact_u_counts(g.pos.len(), g.neg.len());
    let total: f64 = counts.iter().sum();
    // U is an integer for tie-free data
    let u_idx = u.round() as usize;
    let upper: f64 = counts[u_idx..].iter().sum::<f64>() / total;
    match alternative {
        Alternative::Greater => upper,
        Alternative::TwoSided => {
            let lower: f64 = counts[..=u_idx].iter().sum::<f64>() / total;
            (2.0 * upper.min(lower)).min(1.0)
        }
    }
}

/// Normal-approximation p-value with tie-corrected variance and continuity
/// correction.
pub fn normal_pvalue(g: &GroupedScores, alternative: Alternative) -> f64 {
    let (ranks, ties) = g.pooled_ranks();
    let n1 = g.pos.len() as f64;
    let n2 = g.neg.len() as f64;
    let n = n1 + n2;
    let rank_sum: f64 = ranks[..g.pos.len()].iter().sum();
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let p = match alternative {
        Alternative::Greater => std_normal.sf((u - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * std_normal.sf(z)
        }
    };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Mann-Whitney-Wilcoxon p-value: exact for tie-free samples with at most
/// [`EXACT_MAX_N`] scores, normal approximation otherwise.
pub fn mww_pvalue(g: &GroupedScores, alternative: Alternative) -> f64 {
    if g.pos.len() + g.neg.len() <= EXACT_MAX_N && !g.has_ties() {
        exact_pvalue(g, alternative)
    } else {
        normal_pvalue(g, alternative)
    }
}

/// Family-wise error correction procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    Holm,
    Sidak,
}

impl Correction {
    pub const ALL: [Correction; 3] = [Correction::Bonferroni, Correction::Holm, Correction::Sidak];

    pub fn as_str(self) -> &'static str {
        match self {
            Correction::Bonferroni => "bonferroni",
            Correction::Holm => "holm",
            Correction::Sidak => "sidak",
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Correction::Bonferroni),
            "holm" | "holm-bonferroni" => Ok(Correction::Holm),
            "sidak" | "šidák" => Ok(Correction::Sidak),
            other => Err(Error::InvalidArgument(format!("unknown correction `{other}`"))),
        }
    }
}

/// Per-test significance levels and decisions of a correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub method: Correction,
    /// Level each p-value is compared against, in input order.
    pub levels: Vec<f64>,
    /// `decisions[i]` is true when hypothesis `i` is rejected.
    pub decisions: Vec<bool>,
}

impl CorrectionResult {
    pub fn any_rejected(&self) -> bool {
        self.decisions.iter().any(|&d| d)
    }
}

/// Applies a family-wise correction at level `alpha`.
///
/// Holm levels are `alpha / (m - r)` for the p-value of ascending rank `r`
/// (0-based, ties kept in input order); rejection stops at the first failure.
pub fn correct(pvalues: &[f64], alpha: f64, method: Correction) -> Result<CorrectionResult> {
    if pvalues.is_empty() {
        return Err(Error::InvalidArgument("no p-values to correct".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvalues.len();
    let (levels, decisions) = match method {
        Correction::Bonferroni | Correction::Sidak => {
            let level = if method == Correction::Bonferroni {
                alpha / m as f64
            } else {
                1.0 - (1.0 - alpha).powf(1.0 / m as f64)
            };
            let decisions = pvalues.iter().map(|&p| p < level).collect();
            (vec![level; m], decisions)
        }
        Correction::Holm => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
            let mut levels = vec![0.0; m];
            let mut decisions = vec![false; m];
            let mut rejecting = true;
            for (rank, &i) in order.iter().enumerate() {
                levels[i] = alpha / (m - rank) as f64;
                rejecting = rejecting && pvalues[i] < levels[i];
                decisions[i] = rejecting;
            }
            (levels, decisions)
        }
    };
    Ok(CorrectionResult {
        method,
        levels,
        decisions,
    })
}
