//! JSON report schemas. Field names are part of the output contract.

use serde::Serialize;
use tsauc::experiments::{ReductionCurve, UnivariateResult};
use tsauc::mmd::MmdResult;
use tsauc::rank_stats::Correction;
use tsauc::tsauc::{FeatureImportance, GridPoint, ModelSizePoint};
use tsauc::{ImportanceReport, LabeledDataset, TsAucResult};

/// Run configuration, echoed verbatim into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: String,
    pub seed: u64,
    pub alpha: f64,
    pub trees: usize,
    pub ls_min: usize,
    pub ls_max: usize,
    pub m_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub input_sha256: String,
    /// The only field that differs between identical runs.
    pub generated_at: String,
}

impl Meta {
    pub fn new(config: RunConfig, input_sha256: String) -> Self {
        Meta {
            version: tsauc::VERSION,
            seed: config.seed,
            config,
            input_sha256,
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OobScore {
    pub subject_id: String,
    pub posterior: f64,
    pub label: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub d: f64,
    pub sigma: f64,
    /// `null` when fewer than two trees could use the feature.
    #[serde(rename = "I")]
    pub importance: Option<f64>,
}

impl From<&FeatureImportance> for ImportanceEntry {
    fn from(f: &FeatureImportance) -> Self {
        ImportanceEntry {
            feature: f.feature.clone(),
            d: f.d,
            sigma: f.sigma,
            importance: f.importance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TsAucSection {
    pub auc_star: f64,
    pub best_ls: usize,
    pub best_m: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub auc_grid: Vec<GridPoint>,
    pub oob_scores: Vec<OobScore>,
    pub importance: Vec<ImportanceEntry>,
    pub model_size_curve: Vec<ModelSizePoint>,
    pub selected_feature_count: usize,
}

impl TsAucSection {
    pub fn new(r: &TsAucResult, imp: &ImportanceReport, alpha: f64) -> Self {
        let s = &r.oob_scores;
        TsAucSection {
            auc_star: r.auc_star,
            best_ls: r.best_hp.leaf_size,
            best_m: r.best_hp.features_per_tree,
            p_value: r.p_value,
            alpha,
            reject: r.reject(alpha),
            auc_grid: r.auc_grid.clone(),
            oob_scores: (0..s.len())
                .map(|i| OobScore {
                    subject_id: s.ids[i].clone(),
                    posterior: s.posteriors[i],
                    label: u8::from(s.labels[i]),
                })
                .collect(),
            importance: imp.features.iter().map(ImportanceEntry::from).collect(),
            model_size_curve: imp.model_size_curve.clone(),
            selected_feature_count: imp.selected_feature_count,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MmdSection {
    pub mmd2_u: f64,
    pub p_value: f64,
    pub bandwidth: f64,
    pub n_permutations: usize,
    pub reject: bool,
}

impl MmdSection {
    pub fn new(r: &MmdResult, alpha: f64) -> Self {
        MmdSection {
            mmd2_u: r.mmd2_u,
            p_value: r.p_value,
            bandwidth: r.bandwidth,
            n_permutations: r.n_permutations,
            reject: r.reject(alpha),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnivariateEntry {
    pub feature: String,
    pub p_value: f64,
    pub significant_raw: bool,
    pub significant_bonferroni: bool,
    pub significant_holm: bool,
    pub significant_sidak: bool,
}

pub fn univariate_entries(ds: &LabeledDataset, u: &UnivariateResult) -> Vec<UnivariateEntry> {
    ds.feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| UnivariateEntry {
            feature: name.clone(),
            p_value: u.pvalues[j],
            significant_raw: u.raw[j],
            significant_bonferroni: u.correction(Correction::Bonferroni).decisions[j],
            significant_holm: u.correction(Correction::Holm).decisions[j],
            significant_sidak: u.correction(Correction::Sidak).decisions[j],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub meta: Meta,
    pub tsauc: TsAucSection,
    pub mmd: MmdSection,
    pub univariate: Vec<UnivariateEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceJson {
    pub meta: Meta,
    pub best_ls: usize,
    pub best_m: usize,
    pub importance: Vec<ImportanceEntry>,
    /// Feature names from most to least important.
    pub ranking: Vec<String>,
    pub model_size_curve: Vec<ModelSizePoint>,
    pub selected_feature_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryEntry {
    pub method: &'static str,
    pub fraction: f64,
    pub fraction_significant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentJson {
    pub meta: Meta,
    pub mode: &'static str,
    pub summary: Vec<SummaryEntry>,
}

impl ExperimentJson {
    pub fn new(meta: Meta, curve: &ReductionCurve) -> Self {
        ExperimentJson {
            meta,
            mode: curve.mode.as_str(),
            summary: curve
                .summary
                .iter()
                .map(|r| SummaryEntry {
                    method: r.method.as_str(),
                    fraction: r.fraction,
                    fraction_significant: r.fraction_significant,
                })
                .collect(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize infallibly");
    bytes.push(b'\n');
    bytes
}
