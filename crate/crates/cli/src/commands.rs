use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tsauc::experiments::{self, ReductionProtocol};
use tsauc::ingest::resample_default;
use tsauc::tsauc::{importance_report, ts_auc_test, SearchSpace};
use tsauc::{mmd, read_recording, rng, FeatureVector, LabeledDataset, FEATURE_NAMES};

use crate::args::{Command, ExperimentArgs, ExtractArgs, ImportanceArgs, SearchArgs, TestArgs};
use crate::output::{csv_bytes, sha256_file, write_atomic, write_or_stdout};
use crate::report::{
    self, univariate_entries, ExperimentJson, ImportanceEntry, ImportanceJson, Meta, MmdSection, RunConfig,
    TestReport, TsAucSection,
};
use crate::{CliError, Result};

// Independent seed streams per command component.
const MMD_STREAM: u64 = 0x4d4d;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Extract(a) => extract(&a),
        Command::Test(a) => test(&a),
        Command::Importance(a) => importance(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl SearchArgs {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(usage(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.trees == 0 {
            return Err(usage("--trees must be at least 1"));
        }
        if self.ls_min == 0 || self.ls_min > self.ls_max {
            return Err(usage(format!(
                "leaf-size range {}..={} is empty or starts at 0",
                self.ls_min, self.ls_max
            )));
        }
        if self.m_max == 0 {
            return Err(usage("--m-max must be at least 1"));
        }
        Ok(())
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            ls_values: (self.ls_min..=self.ls_max).collect(),
            m_values: (1..=self.m_max).collect(),
            n_trees: self.trees,
            seed: self.seed,
        }
    }

    fn config(&self, command: &'static str, input: &Path) -> RunConfig {
        RunConfig {
            command,
            input: input.display().to_string(),
            seed: self.seed,
            alpha: self.alpha,
            trees: self.trees,
            ls_min: self.ls_min,
            ls_max: self.ls_max,
            m_max: self.m_max,
            permutations: None,
            runs: None,
            mode: None,
            repeats: None,
            fractions: None,
        }
    }
}

fn check_permutations(n: usize) -> Result<()> {
    if n < mmd::MIN_PERMUTATIONS {
        return Err(usage(format!("--permutations must be at least {}, got {n}", mmd::MIN_PERMUTATIONS)));
    }
    Ok(())
}

fn check_runs(n: usize) -> Result<()> {
    if n == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    Ok(())
}

/// Reads `subject_id,label` pairs.
fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bad = |line: usize, msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("{}: missing column `{name}`", path.display())))
    };
    let (id_col, label_col) = (col("subject_id")?, col("label")?);
    let mut labels = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let label = match &rec[label_col] {
            "1" => true,
            "0" => false,
            other => return Err(bad(line, format!("label must be 0 or 1, got `{other}`"))),
        };
        if labels.insert(rec[id_col].to_string(), label).is_some() {
            return Err(bad(line, format!("duplicate subject `{}`", &rec[id_col])));
        }
    }
    Ok(labels)
}

fn recording_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if path.is_file() && is_csv {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn extract(a: &ExtractArgs) -> Result<()> {
    if !(a.rate_hz.is_finite() && a.rate_hz > 0.0) {
        return Err(usage(format!("--rate-hz must be positive, got {}", a.rate_hz)));
    }
    let paths = recording_paths(&a.trajectories)?;
    if paths.is_empty() {
        return Err(CliError::Validation(format!(
            "no recordings found in {}",
            a.trajectories.display()
        )));
    }
    let labels = read_labels(&a.labels)?;

    let mut features = paths
        .par_iter()
        .map(|p| {
            let rec = read_recording(p)?;
            tsauc::extract_features(&resample_default(&rec, a.rate_hz)?)
        })
        .collect::<tsauc::Result<Vec<FeatureVector>>>()?;
    features.sort_by(|x, y| x.subject_id.cmp(&y.subject_id));
    let mut seen = HashSet::new();
    for f in &features {
        if !seen.insert(f.subject_id.as_str()) {
            return Err(CliError::Validation(format!("subject `{}` has more than one recording", f.subject_id)));
        }
    }

    let (kept, skipped): (Vec<&FeatureVector>, Vec<&FeatureVector>) =
        features.iter().partition(|f| labels.contains_key(&f.subject_id));
    if !skipped.is_empty() {
        let ids: Vec<&str> = skipped.iter().map(|f| f.subject_id.as_str()).collect();
        eprintln!("warning: skipped {} recording(s) without a label: {}", ids.len(), ids.join(", "));
    }
    if kept.is_empty() {
        return Err(CliError::Validation("no recording matches a labelled subject".into()));
    }

    let header = std::iter::once("subject_id".to_string())
        .chain(FEATURE_NAMES.iter().map(|s| s.to_string()))
        .chain(std::iter::once("label".to_string()))
        .collect::<Vec<_>>();
    let rows = kept.iter().map(|f| {
        std::iter::once(f.subject_id.clone())
            .chain(f.values.iter().map(|v| v.to_string()))
            .chain(std::iter::once(if labels[&f.subject_id] { "1" } else { "0" }.to_string()))
            .collect::<Vec<_>>()
    });
    write_atomic(&a.out, &csv_bytes(std::iter::once(header).chain(rows))?)
}

fn load(matrix: &Path) -> Result<(LabeledDataset, String)> {
    let ds = LabeledDataset::read_csv_path(matrix)?;
    Ok((ds, sha256_file(matrix)?))
}

fn test(a: &TestArgs) -> Result<()> {
    a.search.validate()?;
    check_permutations(a.permutations)?;
    check_runs(a.runs)?;
    let (ds, sha) = load(&a.matrix)?;
    let alpha = a.search.alpha;

    let ts = ts_auc_test(&ds, &a.search.space())?;
    let imp = importance_report(&ds, &ts.best_hp, a.runs)?;
    let mmd = mmd::mmd_test(&ds, a.permutations, rng::derive_seed(a.search.seed, &[MMD_STREAM]))?;
    let uni = experiments::univariate(&ds, alpha)?;

    let config = RunConfig {
        permutations: Some(a.permutations),
        runs: Some(a.runs),
        ..a.search.config("test", &a.matrix)
    };
    let report = TestReport {
        meta: Meta::new(config, sha),
        tsauc: TsAucSection::new(&ts, &imp, alpha),
        mmd: MmdSection::new(&mmd, alpha),
        univariate: univariate_entries(&ds, &uni),
    };
    write_or_stdout(a.out.as_deref(), &report::to_json(&report))
}

fn importance(a: &ImportanceArgs) -> Result<()> {
    a.search.validate()?;
    check_runs(a.runs)?;
    let (ds, sha) = load(&a.matrix)?;

    let ts = ts_auc_test(&ds, &a.search.space())?;
    let imp = importance_report(&ds, &ts.best_hp, a.runs)?;
    let names = ds.feature_names();

    let config = RunConfig {
        runs: Some(a.runs),
        ..a.search.config("importance", &a.matrix)
    };
    let json = ImportanceJson {
        meta: Meta::new(config, sha),
        best_ls: ts.best_hp.leaf_size,
        best_m: ts.best_hp.features_per_tree,
        importance: imp.features.iter().map(ImportanceEntry::from).collect(),
        ranking: imp.ranking.iter().map(|&j| names[j].clone()).collect(),
        model_size_curve: imp.model_size_curve.clone(),
        selected_feature_count: imp.selected_feature_count,
    };
    write_or_stdout(a.out.as_deref(), &report::to_json(&json))?;

    let bars_path = a.bars.clone().or_else(|| a.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = bars_path {
        let header = ["rank", "feature", "I", "d", "sigma", "selected"].map(String::from).to_vec();
        let rows = imp.ranking.iter().enumerate().map(|(r, &j)| {
            let f = &imp.features[j];
            vec![
                (r + 1).to_string(),
                f.feature.clone(),
                f.importance.map(|v| v.to_string()).unwrap_or_default(),
                f.d.to_string(),
                f.sigma.to_string(),
                u8::from(r < imp.selected_feature_count).to_string(),
            ]
        });
        write_atomic(&path, &csv_bytes(std::iter::once(header).chain(rows))?)?;
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    a.search.validate()?;
    check_permutations(a.permutations)?;
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let (ds, sha) = load(&a.matrix)?;
    let proto = ReductionProtocol {
        fractions: a.fractions.clone().unwrap_or_else(experiments::default_fractions),
        repeats: a.repeats,
        alpha: a.search.alpha,
        seed: a.search.seed,
        search: a.search.space(),
        mmd_permutations: a.permutations,
        ..ReductionProtocol::new(a.mode)
    };
    let curve = experiments::run_reduction(&ds, &proto).map_err(|e| match e {
        tsauc::Error::InvalidArgument(msg) => usage(msg),
        other => other.into(),
    })?;

    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let mode = a.mode.as_str();
    let config = RunConfig {
        permutations: Some(a.permutations),
        mode: Some(mode),
        repeats: Some(a.repeats),
        fractions: Some(proto.fractions.clone()),
        ..a.search.config("experiment", &a.matrix)
    };
    write_atomic(
        &a.out.join("report.json"),
        &report::to_json(&ExperimentJson::new(Meta::new(config, sha), &curve)),
    )?;

    let header = ["method", "mode", "fraction", "repeat", "decision", "p_value"].map(String::from).to_vec();
    let rows = curve.records.iter().map(|r| {
        vec![
            r.method.as_str().to_string(),
            mode.to_string(),
            r.fraction.to_string(),
            r.repeat.to_string(),
            u8::from(r.decision).to_string(),
            r.p_value.to_string(),
        ]
    });
    write_atomic(&a.out.join("repeats.csv"), &csv_bytes(std::iter::once(header).chain(rows))?)?;

    let header = ["method", "mode", "fraction", "fraction_significant"].map(String::from).to_vec();
    let rows = curve.summary.iter().map(|r| {
        vec![
            r.method.as_str().to_string(),
            mode.to_string(),
            r.fraction.to_string(),
            r.fraction_significant.to_string(),
        ]
    });
    write_atomic(&a.out.join("summary.csv"), &csv_bytes(std::iter::once(header).chain(rows))?)
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::{Path, PathBuf};

    use tsauc::synth::GaussianShift;

    use crate::{exit, run};

    fn tsauc(args: &[&str]) -> i32 {
        run(std::iter::once("tsauc").chain(args.iter().copied()))
    }

    fn write_recording(dir: &Path, id: &str, phase: f64) {
        let mut text = String::from("t,x,y\n");
        for k in 0..500 {
            let t = k as f64 / 20.0;
            text += &format!("{t},{},{}\n", (t + phase).sin(), 0.5 * (1.3 * t).cos() + 0.01 * phase);
        }
        fs::write(dir.join(format!("{id}.csv")), text).unwrap();
    }

    fn matrix(dir: &Path, shape: GaussianShift, seed: u64) -> PathBuf {
        let path = dir.join("matrix.csv");
        shape.sample(seed).unwrap().write_csv(fs::File::create(&path).unwrap()).unwrap();
        path
    }

    const SMALL: [&str; 10] = ["--trees", "40", "--ls-min", "4", "--ls-max", "6", "--m-max", "2", "--runs", "2"];

    #[test]
    fn extract_writes_sorted_rows_and_skips_unlabelled() {
        let tmp = tempfile::tempdir().unwrap();
        let rec = tmp.path().join("rec");
        fs::create_dir(&rec).unwrap();
        for (id, phase) in [("s2", 0.3), ("s1", 0.0), ("s3", 1.1)] {
            write_recording(&rec, id, phase);
        }
        let labels = tmp.path().join("labels.csv");
        let out = tmp.path().join("features.csv");
        let args = |o: &Path| {
            vec![
                "extract".to_string(),
                "--trajectories".into(),
                rec.display().to_string(),
                "--labels".into(),
                labels.display().to_string(),
                "--out".into(),
                o.display().to_string(),
            ]
        };
        let call = |o: &Path| run(std::iter::once("tsauc".to_string()).chain(args(o)));

        fs::write(&labels, "subject_id,label\ns1,1\ns2,0\ns3,0\n").unwrap();
        assert_eq!(call(&out), exit::OK);
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("subject_id,RangeX,") && lines[0].ends_with(",AngularDeviation,label"));
        assert!(lines[1].starts_with("s1,") && lines[1].ends_with(",1"));
        assert!(lines[3].starts_with("s3,"));

        fs::write(&labels, "subject_id,label\ns1,1\ns3,0\n").unwrap();
        assert_eq!(call(&out), exit::OK);
        assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);

        fs::write(&labels, "subject_id,label\nother,1\n").unwrap();
        assert_eq!(call(&out), exit::VALIDATION);

        let empty = tmp.path().join("empty");
        fs::create_dir(&empty).unwrap();
        let code = tsauc(&[
            "extract",
            "--trajectories",
            empty.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, exit::VALIDATION);
    }

    #[test]
    fn separable_matrix_is_rejected_by_both_tests() {
        let tmp = tempfile::tempdir().unwrap();
        let m = matrix(tmp.path(), GaussianShift::cohort_shifted(2.5), 1);
        let out = tmp.path().join("report.json");
        let mut args = vec!["test", m.to_str().unwrap(), "--permutations", "199", "--out", out.to_str().unwrap()];
        args.extend(SMALL);
        assert_eq!(tsauc(&args), exit::OK);
        let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
        assert_eq!(r["tsauc"]["reject"], true);
        assert_eq!(r["mmd"]["reject"], true);
        assert_eq!(r["univariate"].as_array().unwrap().len(), 17);
        assert_eq!(r["tsauc"]["oob_scores"].as_array().unwrap().len(), 123);
        for key in ["auc_star", "best_ls", "best_m", "p_value", "alpha", "auc_grid", "importance", "model_size_curve"] {
            assert!(!r["tsauc"][key].is_null(), "{key}");
        }
        assert!(r["tsauc"]["importance"][0].get("I").is_some());
        assert_eq!(r["meta"]["input_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn exit_codes_follow_failure_family() {
        let tmp = tempfile::tempdir().unwrap();
        let bad = tmp.path().join("bad.csv");
        fs::write(&bad, "subject_id,a,b\nx,1,2\n").unwrap();
        assert_eq!(tsauc(&["test", bad.to_str().unwrap()]), exit::VALIDATION);
        assert_eq!(tsauc(&["test", "/no/such/matrix.csv"]), exit::USAGE_OR_IO);
        assert_eq!(tsauc(&["test", bad.to_str().unwrap(), "--alpha", "1.5"]), exit::USAGE_OR_IO);
        assert_eq!(tsauc(&["frobnicate"]), exit::USAGE_OR_IO);
        assert_eq!(tsauc(&["--help"]), exit::OK);

        let lonely = GaussianShift { n_pos: 1, n_neg: 20, dims: 3, shifted: 0, shift: 0.0 };
        let m = matrix(tmp.path(), lonely, 0);
        let mut args = vec!["test", m.to_str().unwrap()];
        args.extend(SMALL);
        assert_eq!(tsauc(&args), exit::INFEASIBLE);
    }

    #[test]
    fn importance_and_experiment_write_their_files() {
        let tmp = tempfile::tempdir().unwrap();
        let m = matrix(tmp.path(), GaussianShift { n_pos: 12, n_neg: 30, dims: 4, shifted: 1, shift: 2.0 }, 3);
        let out = tmp.path().join("imp.json");
        let mut args = vec!["importance", m.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend(SMALL);
        assert_eq!(tsauc(&args), exit::OK);
        let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
        assert_eq!(r["ranking"].as_array().unwrap().len(), 4);
        let bars = fs::read_to_string(tmp.path().join("imp.csv")).unwrap();
        assert!(bars.starts_with("rank,feature,I,d,sigma,selected\n1,"));

        let dir = tmp.path().join("exp");
        let mut args = vec![
            "experiment",
            m.to_str().unwrap(),
            "--mode",
            "nonfaller-only",
            "--repeats",
            "2",
            "--fractions",
            "0.9,0.5",
            "--permutations",
            "99",
            "--out",
            dir.to_str().unwrap(),
        ];
        args.extend(&SMALL[..8]);
        assert_eq!(tsauc(&args), exit::OK);
        let repeats = fs::read_to_string(dir.join("repeats.csv")).unwrap();
        assert!(repeats.starts_with("method,mode,fraction,repeat,decision,p_value\n"));
        assert_eq!(repeats.lines().count(), 1 + 6 * 2 * 2);
        let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
        assert!(summary.starts_with("method,mode,fraction,fraction_significant\nts_auc,nonfaller_only,0.9,"));
        assert!(dir.join("report.json").exists());

        args[7] = "0.5,0.9";
        assert_eq!(tsauc(&args), exit::USAGE_OR_IO);
    }

    #[test]
    fn identical_groups_rarely_reject_at_one_percent() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("null.json");
        let seeds = 20;
        let quiet = (0..seeds)
            .filter(|&s| {
                let m = matrix(tmp.path(), GaussianShift::cohort_null(), 700 + s);
                let seed = s.to_string();
                let args = ["test", m.to_str().unwrap(), "--alpha", "0.01", "--runs", "1", "--seed", &seed];
                assert_eq!(tsauc(&[&args[..], &["--out", out.to_str().unwrap()]].concat()), exit::OK);
                let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
                r["tsauc"]["reject"] == false && r["mmd"]["reject"] == false
            })
            .count();
        assert!(quiet * 100 >= 95 * seeds as usize, "{quiet}/{seeds}");
    }
}
