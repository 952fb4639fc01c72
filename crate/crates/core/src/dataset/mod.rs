//! Defect datasets: PROMISE CSV loading, class statistics and train-fitted
//! min-max scaling.
//!
//! A [`DefectDataset`] is immutable once built. Every transformation
//! (resampling, scaling, column selection) returns a new dataset, so a test
//! set handed to the pipeline can be checksummed before and after a run.

mod registry;
pub mod synth;

pub use registry::{build_split, DataRef, ExperimentSplit, Registry};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use sha2::{Digest, Sha256};

use crate::error::{GhostError, Result};

/// The 20 static class attributes, in canonical order.
pub const PROMISE_ATTRIBUTES: [&str; 20] = [
    "wmc", "dit", "noc", "cbo", "rfc", "lcom", "lcom3", "npm", "loc", "dam", "moa", "mfa", "cam",
    "ic", "cbm", "amc", "ca", "ce", "max_cc", "avg_cc",
];

/// Header names accepted for the bug-count column.
pub const BUG_COLUMN_ALIASES: [&str; 7] = [
    "bug",
    "bugs",
    "bug_count",
    "bugcount",
    "defects",
    "defect",
    "num_bugs",
];

/// Identity columns that are recognised and never treated as attributes.
const IDENTITY_COLUMNS: [&str; 6] = ["name", "name.1", "project", "file", "class", "classname"];
const VERSION_COLUMN: &str = "version";
/// Optional column carrying lines of code for effort metrics when the `loc`
/// attribute itself has been rescaled.
const EFFORT_LOC_COLUMN: &str = "effort_loc";

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub project: String,
    pub versions: Vec<String>,
}

impl Provenance {
    pub fn new(project: impl Into<String>, versions: Vec<String>) -> Self {
        Self {
            project: project.into(),
            versions,
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.project, self.versions.join("+"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectDataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Vec<u8>,
    loc: Vec<f64>,
    names: Vec<String>,
    row_versions: Vec<String>,
    source: Provenance,
}

impl DefectDataset {
    /// Builds a dataset, checking the shape and value invariants.
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        loc: Vec<f64>,
        names: Vec<String>,
        row_versions: Vec<String>,
        source: Provenance,
    ) -> Result<Self> {
        let rows = features.nrows();
        for (what, len) in [
            ("labels", labels.len()),
            ("loc", loc.len()),
            ("names", names.len()),
            ("row_versions", row_versions.len()),
        ] {
            if len != rows {
                return Err(GhostError::Schema(format!(
                    "{what} has {len} entries but the feature matrix has {rows} rows"
                )));
            }
        }
        if feature_names.len() != features.ncols() {
            return Err(GhostError::Dimension {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(GhostError::Schema(format!("label {bad} is not 0 or 1")));
        }
        if let Some((i, l)) = loc.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l >= 0.0)) {
            return Err(GhostError::Schema(format!("row {i} has invalid loc {l}")));
        }
        if let Some(((r, c), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GhostError::Schema(format!(
                "feature value {v} at row {r}, column {c} is not finite"
            )));
        }
        Ok(Self {
            features,
            feature_names,
            labels,
            loc,
            names,
            row_versions,
            source,
        })
    }

    /// Convenience constructor for in-memory data: names are row indices and
    /// loc defaults to 1 per row.
    pub fn from_parts(features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let rows = features.nrows();
        let feature_names = (0..features.ncols()).map(|c| format!("x{c}")).collect();
        Self::new(
            features,
            feature_names,
            labels,
            vec![1.0; rows],
            (0..rows).map(|r| r.to_string()).collect(),
            vec![String::new(); rows],
            Provenance::default(),
        )
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_versions(&self) -> &[String] {
        &self.row_versions
    }

    pub fn source(&self) -> &Provenance {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Percentage of rows labelled defective.
    pub fn buggy_pct(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        100.0 * self.count_label(1) as f64 / self.len() as f64
    }

    /// Returns a dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DefectDataset {
        DefectDataset {
            features: self.features.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            loc: rows.iter().map(|&r| self.loc[r]).collect(),
            names: rows.iter().map(|&r| self.names[r].clone()).collect(),
            row_versions: rows.iter().map(|&r| self.row_versions[r].clone()).collect(),
            source: self.source.clone(),
        }
    }

    /// Returns a dataset restricted to the given feature columns.
    pub fn select_columns(&self, columns: &[usize]) -> DefectDataset {
        DefectDataset {
            features: self.features.select(Axis(1), columns),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            ..self.clone()
        }
    }

    /// Same rows and metadata with a replacement feature matrix of equal shape.
    pub fn with_features(&self, features: Array2<f64>) -> Result<DefectDataset> {
        if features.dim() != self.features.dim() {
            return Err(GhostError::Dimension {
                expected: self.features.ncols(),
                got: features.ncols(),
            });
        }
        DefectDataset::new(
            features,
            self.feature_names.clone(),
            self.labels.clone(),
            self.loc.clone(),
            self.names.clone(),
            self.row_versions.clone(),
            self.source.clone(),
        )
    }

    /// Appends synthetic rows. Each row is `(features, label, loc, name)`.
    pub(crate) fn append_rows(
        &self,
        rows: Array2<f64>,
        labels: Vec<u8>,
        loc: Vec<f64>,
        names: Vec<String>,
    ) -> Result<DefectDataset> {
        if rows.nrows() == 0 {
            return Ok(self.clone());
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), rows.view()])
            .map_err(|_| GhostError::Dimension {
                expected: self.n_features(),
                got: rows.ncols(),
            })?;
        let extra = labels.len();
        let mut out_labels = self.labels.clone();
        out_labels.extend(labels);
        let mut out_loc = self.loc.clone();
        out_loc.extend(loc);
        let mut out_names = self.names.clone();
        out_names.extend(names);
        let mut out_versions = self.row_versions.clone();
        out_versions.extend(std::iter::repeat_n("synthetic".to_string(), extra));
        DefectDataset::new(
            features,
            self.feature_names.clone(),
            out_labels,
            out_loc,
            out_names,
            out_versions,
            self.source.clone(),
        )
    }

    /// Row-wise concatenation; schemas must agree.
    pub fn concat(parts: &[DefectDataset]) -> Result<DefectDataset> {
        let first = parts.first().ok_or(GhostError::EmptyDataset)?;
        if let Some(bad) = parts.iter().find(|p| p.feature_names != first.feature_names) {
            return Err(GhostError::Schema(format!(
                "cannot concatenate {} with {}: attribute lists differ",
                first.source.label(),
                bad.source.label()
            )));
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views).expect("column counts checked");
        let mut versions = Vec::new();
        for p in parts {
            for v in &p.source.versions {
                if !versions.contains(v) {
                    versions.push(v.clone());
                }
            }
        }
        DefectDataset::new(
            features,
            first.feature_names.clone(),
            parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            parts.iter().flat_map(|p| p.loc.iter().copied()).collect(),
            parts.iter().flat_map(|p| p.names.iter().cloned()).collect(),
            parts.iter().flat_map(|p| p.row_versions.iter().cloned()).collect(),
            Provenance::new(first.source.project.clone(), versions),
        )
    }

    /// SHA-256 over every stored value; used to prove that a dataset was not
    /// modified by a pipeline run.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.features.nrows() as u64).to_le_bytes());
        h.update((self.features.ncols() as u64).to_le_bytes());
        for v in self.features.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(&self.labels);
        for v in &self.loc {
            h.update(v.to_bits().to_le_bytes());
        }
        for s in self.names.iter().chain(&self.row_versions).chain(&self.feature_names) {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        }
        h.finalize().iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
    }

    /// Serialises to PROMISE-style CSV. Values use the shortest round-trip
    /// representation, so reloading reproduces them bit for bit.
    pub fn to_csv_string(&self) -> String {
        let loc_col = self.feature_names.iter().position(|n| n == "loc");
        let needs_effort_loc = match loc_col {
            Some(c) => self
                .features
                .column(c)
                .iter()
                .zip(&self.loc)
                .any(|(a, b)| a.to_bits() != b.to_bits()),
            None => true,
        };
        let mut out = String::new();
        out.push_str("name,version");
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        if needs_effort_loc {
            out.push(',');
            out.push_str(EFFORT_LOC_COLUMN);
        }
        out.push_str(",bug\n");
        for r in 0..self.len() {
            let _ = write!(out, "{},{}", csv_field(&self.names[r]), csv_field(&self.row_versions[r]));
            for v in self.features.row(r) {
                let _ = write!(out, ",{v:?}");
            }
            if needs_effort_loc {
                let _ = write!(out, ",{:?}", self.loc[r]);
            }
            let _ = writeln!(out, ",{}", self.labels[r]);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| GhostError::io(path, e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn normalize_header(h: &str) -> String {
    h.trim().trim_matches('"').trim().to_ascii_lowercase().replace('-', "_")
}

/// Splits a file stem such as `ivy-2.0` into project and version.
pub(crate) fn parse_stem(stem: &str) -> (String, String) {
    match stem.rsplit_once('-') {
        Some((p, v)) if v.chars().next().is_some_and(|c| c.is_ascii_digit()) => {
            (p.to_ascii_lowercase(), v.to_string())
        }
        _ => (stem.to_ascii_lowercase(), String::new()),
    }
}

/// Loads a PROMISE-format CSV file. Attributes are reordered into
/// [`PROMISE_ATTRIBUTES`] order; rows with a bug count above zero are
/// labelled defective.
pub fn load_promise_csv(path: &Path) -> Result<DefectDataset> {
    let text = fs::read_to_string(path).map_err(|e| GhostError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let (project, version) = parse_stem(stem);
    parse_promise_csv(&text, Provenance::new(project, vec![version]))
}

/// Parses PROMISE CSV text; see [`load_promise_csv`].
pub fn parse_promise_csv(text: &str, source: Provenance) -> Result<DefectDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(normalize_header).collect();

    let mut attr_pos = [usize::MAX; 20];
    let mut bug_pos = None;
    let mut name_pos = None;
    let mut version_pos = None;
    let mut effort_pos = None;
    for (i, h) in headers.iter().enumerate() {
        if let Some(a) = PROMISE_ATTRIBUTES.iter().position(|a| a == h) {
            if attr_pos[a] != usize::MAX {
                return Err(GhostError::Schema(format!("attribute column '{h}' appears twice")));
            }
            attr_pos[a] = i;
        } else if BUG_COLUMN_ALIASES.contains(&h.as_str()) {
            if bug_pos.is_some() {
                return Err(GhostError::Schema(format!("more than one bug column ('{h}')")));
            }
            bug_pos = Some(i);
        } else if IDENTITY_COLUMNS.contains(&h.as_str()) {
            // The last identity column holds the class name in jureczko-style files
            // (`name,version,name,...`).
            name_pos = Some(i);
        } else if h == VERSION_COLUMN {
            version_pos = Some(i);
        } else if h == EFFORT_LOC_COLUMN {
            effort_pos = Some(i);
        } else {
            return Err(GhostError::Schema(format!(
                "unexpected column '{h}'; expected the attributes {} and one bug column named one of {}",
                PROMISE_ATTRIBUTES.join(","),
                BUG_COLUMN_ALIASES.join("|")
            )));
        }
    }
    if let Some(missing) = attr_pos.iter().position(|&p| p == usize::MAX) {
        return Err(GhostError::Schema(format!(
            "missing attribute column '{}'",
            PROMISE_ATTRIBUTES[missing]
        )));
    }
    let bug_pos = bug_pos.ok_or_else(|| {
        GhostError::Schema(format!(
            "missing bug-count column; accepted names: {}",
            BUG_COLUMN_ALIASES.join(", ")
        ))
    })?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut loc = Vec::new();
    let mut names = Vec::new();
    let mut versions = Vec::new();
    let default_version = source.versions.first().cloned().unwrap_or_default();
    let loc_attr = PROMISE_ATTRIBUTES.iter().position(|&a| a == "loc").expect("loc is an attribute");

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |pos: usize| -> Result<f64> {
            let raw = record.get(pos).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GhostError::Parse {
                    row: row + 1,
                    column: headers[pos].clone(),
                    message: format!("'{raw}' is not a finite number"),
                })
        };
        let start = values.len();
        for &p in &attr_pos {
            values.push(cell(p)?);
        }
        let bugs = cell(bug_pos)?;
        if bugs < 0.0 {
            return Err(GhostError::Parse {
                row: row + 1,
                column: headers[bug_pos].clone(),
                message: format!("negative bug count {bugs}"),
            });
        }
        labels.push(u8::from(bugs > 0.0));
        let row_loc = match effort_pos {
            Some(p) => cell(p)?,
            None => values[start + loc_attr],
        };
        if row_loc < 0.0 {
            return Err(GhostError::Parse {
                row: row + 1,
                column: "loc".into(),
                message: format!("negative lines of code {row_loc}"),
            });
        }
        loc.push(row_loc);
        names.push(match name_pos {
            Some(p) => record.get(p).unwrap_or("").to_string(),
            None => format!("row{}", row + 1),
        });
        versions.push(match version_pos {
            Some(p) => record.get(p).unwrap_or("").to_string(),
            None => default_version.clone(),
        });
    }
    if labels.is_empty() {
        return Err(GhostError::EmptyDataset);
    }
    let features = Array2::from_shape_vec((labels.len(), PROMISE_ATTRIBUTES.len()), values)
        .expect("row width fixed at 20");
    DefectDataset::new(
        features,
        PROMISE_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
        labels,
        loc,
        names,
        versions,
        source,
    )
}

/// Class-balance summary of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    /// Fraction of rows in the minority class, in (0, 0.5].
    pub minority_fraction: f64,
    /// Majority count over minority count.
    pub imbalance_ratio: f64,
    /// Minority label; label 1 on an exact tie.
    pub minority_label: u8,
    pub minority_count: usize,
    pub majority_count: usize,
}

impl ClassStats {
    pub fn majority_label(&self) -> u8 {
        1 - self.minority_label
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassBalance {
    Binary(ClassStats),
    /// Only one label is present.
    SingleClass { label: u8, count: usize },
}

impl ClassBalance {
    pub fn binary(&self) -> Option<&ClassStats> {
        match self {
            ClassBalance::Binary(s) => Some(s),
            ClassBalance::SingleClass { .. } => None,
        }
    }
}

pub fn class_stats(ds: &DefectDataset) -> Result<ClassBalance> {
    class_stats_of(ds.labels())
}

pub fn class_stats_of(labels: &[u8]) -> Result<ClassBalance> {
    if labels.is_empty() {
        return Err(GhostError::EmptyDataset);
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones == 0 || zeros == 0 {
        return Ok(ClassBalance::SingleClass {
            label: u8::from(ones > 0),
            count: labels.len(),
        });
    }
    let (minority_label, minority_count, majority_count) = if ones <= zeros {
        (1, ones, zeros)
    } else {
        (0, zeros, ones)
    };
    Ok(ClassBalance::Binary(ClassStats {
        minority_fraction: minority_count as f64 / labels.len() as f64,
        imbalance_ratio: majority_count as f64 / minority_count as f64,
        minority_label,
        minority_count,
        majority_count,
    }))
}

/// Per-column min-max scaler fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &DefectDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(GhostError::EmptyDataset);
        }
        let x = ds.features();
        let min = x
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let max = x
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Self { min, max })
    }

    pub fn transform(&self, ds: &DefectDataset) -> Result<DefectDataset> {
        if ds.n_features() != self.min.len() {
            return Err(GhostError::Dimension {
                expected: self.min.len(),
                got: ds.n_features(),
            });
        }
        let mut x = ds.features().clone();
        for (c, mut col) in x.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[c], self.max[c]);
            let span = hi - lo;
            col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
        }
        ds.with_features(x)
    }
}

/// Fits a min-max scaler on `train` and applies it to both sets. The test set
/// is only ever transformed with training statistics.
pub fn normalize_features(
    train: &DefectDataset,
    test: &DefectDataset,
) -> Result<(DefectDataset, DefectDataset, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(train)?;
    Ok((scaler.transform(train)?, scaler.transform(test)?, scaler))
}
