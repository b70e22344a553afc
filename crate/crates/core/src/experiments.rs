//! Population-reduction studies comparing ts-AUC, MMD and univariate testing.
//!
//! At each retained fraction the cohort is subsampled at random several
//! times and every method is run on each subsample. The univariate methods
//! decide "different" when any feature is significant, raw or after a
//! family-wise correction.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mmd;
use crate::rank_stats::{self, Alternative, Correction, CorrectionResult, GroupedScores};
use crate::rng;
use crate::tsauc::{self, SearchSpace};

/// Redraws allowed for a uniform subsample before giving up.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMode {
    /// Subsample the whole cohort.
    UniformPopulation,
    /// Keep every faller and subsample the non-fallers.
    NonfallerOnly,
}

impl ReductionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReductionMode::UniformPopulation => "uniform_population",
            ReductionMode::NonfallerOnly => "nonfaller_only",
        }
    }
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "uniform_population" | "uniform" => Ok(ReductionMode::UniformPopulation),
            "nonfaller_only" | "nonfaller" => Ok(ReductionMode::NonfallerOnly),
            other => Err(Error::InvalidArgument(format!("unknown reduction mode `{other}`"))),
        }
    }
}

/// Testing procedures compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TsAuc,
    Mmd,
    /// Uncorrected univariate Mann-Whitney-Wilcoxon on every feature.
    Mww,
    Bonferroni,
    Holm,
    Sidak,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TsAuc,
        Method::Mmd,
        Method::Mww,
        Method::Bonferroni,
        Method::Holm,
        Method::Sidak,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TsAuc => "ts_auc",
            Method::Mmd => "mmd",
            Method::Mww => "mww",
            Method::Bonferroni => "bonferroni",
            Method::Holm => "holm",
            Method::Sidak => "sidak",
        }
    }

    fn correction(self) -> Option<Correction> {
        match self {
            Method::Bonferroni => Some(Correction::Bonferroni),
            Method::Holm => Some(Correction::Holm),
            Method::Sidak => Some(Correction::Sidak),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-feature two-sided MWW tests with every correction applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateResult {
    pub pvalues: Vec<f64>,
    /// `pvalues[j] < alpha`
    pub raw: Vec<bool>,
    pub corrections: Vec<CorrectionResult>,
}

impl UnivariateResult {
    pub fn correction(&self, method: Correction) -> &CorrectionResult {
        self.corrections
            .iter()
            .find(|c| c.method == method)
            .expect("all corrections are computed")
    }
}

pub fn univariate(ds: &LabeledDataset, alpha: f64) -> Result<UnivariateResult> {
    let pvalues = (0..ds.n_features())
        .map(|j| {
            let g = GroupedScores::from_labels(&ds.column(j), ds.labels())?;
            Ok(rank_stats::mww_pvalue(&g, Alternative::TwoSided))
        })
        .collect::<Result<Vec<f64>>>()?;
    let corrections = Correction::ALL
        .iter()
        .map(|&c| rank_stats::correct(&pvalues, alpha, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnivariateResult {
        raw: pvalues.iter().map(|&p| p < alpha).collect(),
        pvalues,
        corrections,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionProtocol {
    pub mode: ReductionMode,
    /// Retained proportions, strictly decreasing, in (0, 1].
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Grid for the ts-AUC runs; its seed is replaced per repeat.
    pub search: SearchSpace,
    pub mmd_permutations: usize,
}

impl ReductionProtocol {
    /// 95% down to 35% in steps of 10%, 12 repeats each.
    pub fn new(mode: ReductionMode) -> Self {
        ReductionProtocol {
            mode,
            fractions: default_fractions(),
            repeats: 12,
            alpha: 0.05,
            seed: 0,
            search: SearchSpace::default(),
            mmd_permutations: mmd::DEFAULT_PERMUTATIONS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::InvalidArgument("no fractions given".into()));
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::InvalidArgument("fractions must lie in (0, 1]".into()));
        }
        if self.fractions.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("fractions must be strictly decreasing".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("at least one repeat is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

pub fn default_fractions() -> Vec<f64> {
    (0..7).map(|i| (95 - 10 * i) as f64 / 100.0).collect()
}

/// One method's outcome on one subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub method: Method,
    pub fraction: f64,
    pub repeat: usize,
    pub decision: bool,
    /// Test p-value; for the univariate methods the smallest feature p-value.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub fraction: f64,
    pub fraction_significant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCurve {
    pub mode: ReductionMode,
    /// Ordered by method, then fraction (as given), then repeat.
    pub records: Vec<RepeatRecord>,
    /// Ordered by method, then fraction.
    pub summary: Vec<SummaryRow>,
}

impl ReductionCurve {
    pub fn fraction_significant(&self, method: Method, fraction: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.fraction == fraction)
            .map(|r| r.fraction_significant)
    }

    pub fn decisions(&self, method: Method, fraction: f64) -> Vec<bool> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.fraction == fraction)
            .map(|r| r.decision)
            .collect()
    }
}

fn subsample(
    ds: &LabeledDataset,
    mode: ReductionMode,
    fraction: f64,
    rng: &mut impl rand::Rng,
) -> Result<Vec<usize>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| ds.labels()[i]);
    let mut keep = match mode {
        ReductionMode::NonfallerOnly => {
            let k = (fraction * neg.len() as f64).round() as usize;
            let mut keep = pos;
            keep.extend(index::sample(rng, neg.len(), k).into_iter().map(|i| neg[i]));
            keep
        }
        ReductionMode::UniformPopulation => {
            let k = (fraction * ds.len() as f64).round() as usize;
            let mut attempt = 0;
            loop {
                let keep: Vec<usize> = index::sample(rng, ds.len(), k).into_vec();
                let n_pos = keep.iter().filter(|&&i| ds.labels()[i]).count();
                if n_pos >= 2 && k - n_pos >= 2 {
                    break keep;
                }
                attempt += 1;
                if attempt >= MAX_REDRAWS {
                    return Err(Error::Infeasible(format!(
                        "no subsample with both classes at fraction {fraction} after {MAX_REDRAWS} draws"
                    )));
                }
            }
        }
    };
    keep.sort_unstable();
    Ok(keep)
}

/// Runs every method on every subsample of the protocol.
pub fn run_reduction(ds: &LabeledDataset, proto: &ReductionProtocol) -> Result<ReductionCurve> {
    proto.validate()?;
    for &f in &proto.fractions {
        let infeasible = match proto.mode {
            ReductionMode::NonfallerOnly => (f * ds.n_neg() as f64).round() < 2.0,
            ReductionMode::UniformPopulation => (f * ds.len() as f64).round() < 4.0,
        };
        if infeasible {
            return Err(Error::Infeasible(format!(
                "fraction {f} leaves fewer than 2 subjects in a group"
            )));
        }
    }
    if ds.n_pos() < 2 {
        return Err(Error::Infeasible("experiments need at least 2 fallers".into()));
    }

    let jobs: Vec<(usize, usize)> = (0..proto.fractions.len())
        .flat_map(|fi| (0..proto.repeats).map(move |r| (fi, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(fi, r)| {
            let fraction = proto.fractions[fi];
            let path = [fi as u64, r as u64];
            let mut draw = rng::stream(proto.seed, &path);
            let sub = ds.subset(&subsample(ds, proto.mode, fraction, &mut draw)?)?;

            let space = SearchSpace {
                seed: rng::derive_seed(proto.seed, &[fi as u64, r as u64, 1]),
                ..proto.search.clone()
            };
            let ts = tsauc::ts_auc_test(&sub, &space)?;
            let mmd = mmd::mmd_test(
                &sub,
                proto.mmd_permutations,
                rng::derive_seed(proto.seed, &[fi as u64, r as u64, 2]),
            )?;
            let uni = univariate(&sub, proto.alpha)?;
            let min_p = uni.pvalues.iter().copied().fold(1.0, f64::min);

            Ok(Method::ALL
                .iter()
                .map(|&method| {
                    let (decision, p_value) = match method {
                        Method::TsAuc => (ts.reject(proto.alpha), ts.p_value),
                        Method::Mmd => (mmd.reject(proto.alpha), mmd.p_value),
                        Method::Mww => (uni.raw.iter().any(|&d| d), min_p),
                        m => (uni.correction(m.correction().unwrap()).any_rejected(), min_p),
                    };
                    RepeatRecord {
                        method,
                        fraction,
                        repeat: r,
                        decision,
                        p_value,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records: Vec<RepeatRecord> = outcomes.into_iter().flatten().collect();
    let fraction_index = |f: f64| proto.fractions.iter().position(|&x| x == f).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(fraction_index(a.fraction).cmp(&fraction_index(b.fraction)))
            .then(a.repeat.cmp(&b.repeat))
    });

    let summary = Method::ALL
        .iter()
        .flat_map(|&method| {
            let records = &records;
            proto.fractions.iter().map(move |&fraction| {
                let hits: Vec<bool> = records
                    .iter()
                    .filter(|r| r.method == method && r.fraction == fraction)
                    .map(|r| r.decision)
                    .collect();
                SummaryRow {
                    method,
                    fraction,
                    fraction_significant: hits.iter().filter(|&&d| d).count() as f64 / hits.len() as f64,
                }
            })
        })
        .collect();

    Ok(ReductionCurve {
        mode: proto.mode,
        records,
        summary,
    })
}
