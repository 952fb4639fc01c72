use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::{load_promise_csv, DefectDataset};
use crate::error::{GhostError, Result};

/// Buggy-percentage drift tolerated before a split emits a warning.
pub const BUGGY_PCT_TOLERANCE: f64 = 2.0;

/// One project release, e.g. `ivy` `2.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataRef {
    pub project: String,
    pub version: String,
}

impl DataRef {
    pub fn new(project: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            project: project.into().to_ascii_lowercase(),
            version: version.into(),
        }
    }

    /// Parses `project-version`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.rsplit_once('-') {
            Some((p, v)) if !p.is_empty() && !v.is_empty() => Ok(Self::new(p, v)),
            _ => Err(GhostError::Registry(format!(
                "'{s}' is not of the form project-version"
            ))),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-{}.csv", self.project, self.version)
    }

    /// Finds the CSV for this release under `data_dir`, matching the project
    /// name case-insensitively.
    pub fn resolve(&self, data_dir: &Path) -> Result<PathBuf> {
        let direct = data_dir.join(self.file_name());
        if direct.is_file() {
            return Ok(direct);
        }
        let wanted = self.file_name();
        if let Ok(entries) = fs::read_dir(data_dir) {
            for e in entries.flatten() {
                if e.file_name().to_string_lossy().to_ascii_lowercase() == wanted {
                    return Ok(e.path());
                }
            }
        }
        Err(GhostError::MissingVersion {
            project: self.project.clone(),
            version: self.version.clone(),
            path: direct,
        })
    }

    pub fn load(&self, data_dir: &Path) -> Result<DefectDataset> {
        load_promise_csv(&self.resolve(data_dir)?)
    }
}

impl std::fmt::Display for DataRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.project, self.version)
    }
}

/// Compares dotted release numbers numerically (`1.10` > `1.9`).
pub(crate) fn compare_versions(a: &str, b: &str) -> Ordering {
    let parts = |s: &str| -> Vec<u64> {
        s.split(['.', '_'])
            .map(|p| p.trim().parse::<u64>().unwrap_or(0))
            .collect()
    };
    let (pa, pb) = (parts(a), parts(b));
    for i in 0..pa.len().max(pb.len()) {
        let x = pa.get(i).copied().unwrap_or(0);
        let y = pb.get(i).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Train/test release lists for one within-project experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplit {
    pub project: String,
    pub train_versions: Vec<String>,
    pub test_versions: Vec<String>,
    pub expected_train_buggy_pct: Option<f64>,
    pub expected_test_buggy_pct: Option<f64>,
}

impl ExperimentSplit {
    /// Validates that the version sets are disjoint and that every test
    /// release is later than every training release.
    pub fn new(
        project: impl Into<String>,
        train_versions: Vec<String>,
        test_versions: Vec<String>,
        expected_train_buggy_pct: Option<f64>,
        expected_test_buggy_pct: Option<f64>,
    ) -> Result<Self> {
        let project = project.into().to_ascii_lowercase();
        if train_versions.is_empty() || test_versions.is_empty() {
            return Err(GhostError::Registry(format!(
                "{project}: both train and test version lists must be non-empty"
            )));
        }
        let train: HashSet<&String> = train_versions.iter().collect();
        if let Some(dup) = test_versions.iter().find(|v| train.contains(v)) {
            return Err(GhostError::Registry(format!(
                "{project}: version {dup} is in both train and test"
            )));
        }
        for t in &test_versions {
            if let Some(later) = train_versions
                .iter()
                .find(|v| compare_versions(t, v) != Ordering::Greater)
            {
                return Err(GhostError::Registry(format!(
                    "{project}: test version {t} is not later than train version {later}"
                )));
            }
        }
        Ok(Self {
            project,
            train_versions,
            test_versions,
            expected_train_buggy_pct,
            expected_test_buggy_pct,
        })
    }

    pub fn train_refs(&self) -> Vec<DataRef> {
        self.train_versions
            .iter()
            .map(|v| DataRef::new(&self.project, v))
            .collect()
    }

    pub fn test_refs(&self) -> Vec<DataRef> {
        self.test_versions
            .iter()
            .map(|v| DataRef::new(&self.project, v))
            .collect()
    }
}

/// Loads and concatenates the releases of a split.
///
/// Buggy percentages that drift more than [`BUGGY_PCT_TOLERANCE`] points from
/// the registry values are logged as warnings. A module identifier that shows
/// up in both sets under the same release tag is an error.
pub fn build_split(split: &ExperimentSplit, data_dir: &Path) -> Result<(DefectDataset, DefectDataset)> {
    let load_all = |refs: Vec<DataRef>| -> Result<DefectDataset> {
        let parts = refs
            .iter()
            .map(|r| r.load(data_dir))
            .collect::<Result<Vec<_>>>()?;
        DefectDataset::concat(&parts)
    };
    let train = load_all(split.train_refs())?;
    let test = load_all(split.test_refs())?;

    let train_keys: HashSet<(&str, &str)> = train
        .names()
        .iter()
        .zip(train.row_versions())
        .map(|(n, v)| (n.as_str(), v.as_str()))
        .collect();
    if let Some((n, v)) = test
        .names()
        .iter()
        .zip(test.row_versions())
        .find(|(n, v)| train_keys.contains(&(n.as_str(), v.as_str())))
    {
        return Err(GhostError::Registry(format!(
            "{}: module {n} (version {v}) appears in both train and test",
            split.project
        )));
    }

    for (what, ds, expected) in [
        ("train", &train, split.expected_train_buggy_pct),
        ("test", &test, split.expected_test_buggy_pct),
    ] {
        if let Some(exp) = expected {
            let got = ds.buggy_pct();
            if (got - exp).abs() > BUGGY_PCT_TOLERANCE {
                warn!(
                    "{} {what}: buggy {got:.1}% differs from the registry's {exp}% by more than {BUGGY_PCT_TOLERANCE} points",
                    split.project
                );
            }
        }
    }
    Ok((train, test))
}

/// Collection of named splits.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    splits: BTreeMap<String, ExperimentSplit>,
}

const DEFAULT_SPLITS: [(&str, &[&str], &[&str], f64, f64); 10] = [
    ("ivy", &["1.1", "1.4"], &["2.0"], 22.0, 11.0),
    ("lucene", &["2.0", "2.2"], &["2.4"], 53.0, 60.0),
    ("poi", &["1.5", "2.0", "2.5"], &["3.0"], 46.0, 65.0),
    ("synapse", &["1.0", "1.1"], &["1.2"], 20.0, 34.0),
    ("velocity", &["1.4", "1.5"], &["1.6"], 71.0, 34.0),
    ("camel", &["1.0", "1.2", "1.4"], &["1.6"], 21.0, 19.0),
    ("jedit", &["3.2", "4.0", "4.1", "4.2"], &["4.3"], 23.0, 2.0),
    ("log4j", &["1.0", "1.1"], &["1.2"], 29.0, 92.0),
    ("xalan", &["2.4", "2.5", "2.6"], &["2.7"], 38.0, 99.0),
    ("xerces", &["1.2", "1.3"], &["1.4"], 16.0, 74.0),
];

impl Registry {
    /// The ten within-project splits with their expected buggy percentages.
    pub fn standard() -> Self {
        let mut reg = Registry::default();
        for (project, train, test, tr_pct, te_pct) in DEFAULT_SPLITS {
            let split = ExperimentSplit::new(
                project,
                train.iter().map(|s| s.to_string()).collect(),
                test.iter().map(|s| s.to_string()).collect(),
                Some(tr_pct),
                Some(te_pct),
            )
            .expect("built-in splits are valid");
            reg.insert(split);
        }
        reg
    }

    pub fn insert(&mut self, split: ExperimentSplit) {
        self.splits.insert(split.project.clone(), split);
    }

    pub fn get(&self, project: &str) -> Result<&ExperimentSplit> {
        self.splits
            .get(&project.to_ascii_lowercase())
            .ok_or_else(|| GhostError::UnknownKey {
                source_name: "registry".into(),
                key: project.into(),
                available: self.projects().join(", "),
            })
    }

    pub fn projects(&self) -> Vec<String> {
        self.splits.keys().cloned().collect()
    }

    pub fn splits(&self) -> impl Iterator<Item = &ExperimentSplit> {
        self.splits.values()
    }

    /// Parses a key-value registry file:
    ///
    /// ```text
    /// # comment
    /// ivy.train = 1.1, 1.4
    /// ivy.test = 2.0
    /// ivy.train_buggy_pct = 22
    /// ivy.test_buggy_pct = 11
    /// ```
    pub fn parse_config(text: &str) -> Result<Self> {
        #[derive(Default)]
        struct Partial {
            train: Option<Vec<String>>,
            test: Option<Vec<String>>,
            train_pct: Option<f64>,
            test_pct: Option<f64>,
        }
        let mut partial: BTreeMap<String, Partial> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || GhostError::Registry(format!("line {}: cannot parse '{line}'", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let (project, field) = key.trim().rsplit_once('.').ok_or_else(bad)?;
            let entry = partial.entry(project.trim().to_ascii_lowercase()).or_default();
            let list = || -> Vec<String> {
                value
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect()
            };
            let pct = || -> Result<f64> { value.trim().parse::<f64>().map_err(|_| bad()) };
            match field.trim() {
                "train" => entry.train = Some(list()),
                "test" => entry.test = Some(list()),
                "train_buggy_pct" => entry.train_pct = Some(pct()?),
                "test_buggy_pct" => entry.test_pct = Some(pct()?),
                other => {
                    return Err(GhostError::Registry(format!(
                        "line {}: unknown field '{other}' (expected train, test, train_buggy_pct, test_buggy_pct)",
                        lineno + 1
                    )))
                }
            }
        }
        let mut reg = Registry::default();
        for (project, p) in partial {
            let train = p
                .train
                .ok_or_else(|| GhostError::Registry(format!("{project}: missing train list")))?;
            let test = p
                .test
                .ok_or_else(|| GhostError::Registry(format!("{project}: missing test list")))?;
            reg.insert(ExperimentSplit::new(project, train, test, p.train_pct, p.test_pct)?);
        }
        Ok(reg)
    }

    pub fn load_config(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GhostError::io(path, e))?;
        Self::parse_config(&text)
    }

    /// Adds or replaces splits from another registry.
    pub fn extend(&mut self, other: Registry) {
        self.splits.extend(other.splits);
    }
}
