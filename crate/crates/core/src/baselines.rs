//! Published comparison numbers bundled with the crate: DODGE and plain
//! deep-learner medians per dataset, and Wang et al.'s within- and
//! cross-project scores. The CSV files are compiled in and checked against
//! fixed SHA-256 digests before use.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DataRef;
use crate::error::{GhostError, Result};
use crate::stats::{point_compare, ComparisonRow, PointStatsParams, Verdict, WtlCounts};

const DODGE_CSV: &str = include_str!("../../../data/baselines/dodge_table5.csv");
const WANG_WPDP_CSV: &str = include_str!("../../../data/baselines/wang_wpdp_table6.csv");
const WANG_CPDP_CSV: &str = include_str!("../../../data/baselines/wang_cpdp_table7.csv");
const SUMMARIES_CSV: &str = include_str!("../../../data/baselines/published_summaries.csv");

const DODGE_SHA256: &str = "0302cba91c1e0cf8730f66a9b888e9e55eb83ce5a951dac923f731b52fa130e9";
const WANG_WPDP_SHA256: &str = "5470568c51c05f69edb377dbcaa224fbdab77cc53be6524e8b13e86834584149";
const WANG_CPDP_SHA256: &str = "559da6d57e695dad7122582d6cd116f609665f5b8eef317ccea7033936d32746";
const SUMMARIES_SHA256: &str = "ce01cb7f3b8e49b2800a5f59cb96a96523c653ece72e86feb7b355cba7f2c6b2";

/// Published tie radius for the within-project F1 comparison.
pub const WPDP_DELTA: f64 = 4.91;
/// Published tie radius for the cross-project F1 comparison.
pub const CPDP_DELTA: f64 = 4.41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    DodgeTable5,
    WangWpdpTable6,
    WangCpdpTable7,
}

impl BaselineSource {
    pub const ALL: [BaselineSource; 3] = [
        BaselineSource::DodgeTable5,
        BaselineSource::WangWpdpTable6,
        BaselineSource::WangCpdpTable7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineSource::DodgeTable5 => "dodge_table5",
            BaselineSource::WangWpdpTable6 => "wang_wpdp_table6",
            BaselineSource::WangCpdpTable7 => "wang_cpdp_table7",
        }
    }

    /// The learner returned by [`lookup`].
    pub fn reference_learner(self) -> &'static str {
        match self {
            BaselineSource::DodgeTable5 => "DODGE",
            _ => "wang",
        }
    }

    fn text_and_digest(self) -> (&'static str, &'static str) {
        match self {
            BaselineSource::DodgeTable5 => (DODGE_CSV, DODGE_SHA256),
            BaselineSource::WangWpdpTable6 => (WANG_WPDP_CSV, WANG_WPDP_SHA256),
            BaselineSource::WangCpdpTable7 => (WANG_CPDP_CSV, WANG_CPDP_SHA256),
        }
    }
}

impl fmt::Display for BaselineSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineSource {
    type Err = GhostError;

    fn from_str(s: &str) -> Result<Self> {
        BaselineSource::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| GhostError::UnknownKey {
                source_name: "baseline sources".into(),
                key: s.into(),
                available: BaselineSource::ALL.map(BaselineSource::name).join(", "),
            })
    }
}

/// One published row: a dataset or train/test pair, a learner and its
/// metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub key: String,
    pub learner: String,
    pub values: BTreeMap<String, f64>,
    /// Printed as best in the published table.
    pub best: Option<bool>,
    pub two_sample: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub source: BaselineSource,
    pub rows: Vec<BaselineRow>,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn verified(name: &str, text: &'static str, digest: &str) -> Result<&'static str> {
    let got = sha256_hex(text);
    if got != digest {
        return Err(GhostError::Registry(format!(
            "bundled baseline file {name} has digest {got}, expected {digest}"
        )));
    }
    Ok(text)
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty())
}

/// `a->b` for a train/test or source/target pair.
pub fn pair_key(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

/// Splits `a->b` (or `a→b`) into its two releases.
pub fn parse_pair_key(key: &str) -> Result<(DataRef, DataRef)> {
    let k = normalize_key(key);
    match k.split_once("->") {
        Some((a, b)) => Ok((DataRef::parse(a)?, DataRef::parse(b)?)),
        None => Err(GhostError::Registry(format!("'{key}' is not of the form release->release"))),
    }
}

fn normalize_key(key: &str) -> String {
    key.replace('→', "->").replace(' ', "").to_ascii_lowercase()
}

fn parse_bool(s: &str, name: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(GhostError::Registry(format!("{name}: expected true/false, got '{s}'"))),
    }
}

impl BaselineTable {
    pub fn load(source: BaselineSource) -> Result<Self> {
        let (text, digest) = source.text_and_digest();
        let text = verified(source.name(), text, digest)?;
        let mut lines = data_lines(text);
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| GhostError::Registry(format!("{source}: missing header")))?
            .split(',')
            .collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let (key_cols, metrics): (Vec<usize>, Vec<&str>) = match source {
            BaselineSource::DodgeTable5 => (vec![0], vec!["auc", "popt20", "recall", "pf"]),
            BaselineSource::WangWpdpTable6 => (vec![0, 1], vec!["precision", "recall", "f1"]),
            BaselineSource::WangCpdpTable7 => (vec![0, 1], vec!["f1"]),
        };
        let learner_col = col("learner").ok_or_else(|| GhostError::Registry(format!("{source}: no learner column")))?;
        let mut rows = Vec::new();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(GhostError::Registry(format!("{source}: malformed row '{line}'")));
            }
            let key = if key_cols.len() == 1 {
                cells[key_cols[0]].to_string()
            } else {
                pair_key(cells[key_cols[0]], cells[key_cols[1]])
            };
            let mut values = BTreeMap::new();
            for m in &metrics {
                let c = col(m).ok_or_else(|| GhostError::Registry(format!("{source}: no {m} column")))?;
                let v: f64 = cells[c]
                    .parse()
                    .map_err(|_| GhostError::Registry(format!("{source}: bad number '{}'", cells[c])))?;
                values.insert(m.to_string(), v);
            }
            let flag = |name: &str| col(name).map(|c| parse_bool(cells[c], source.name())).transpose();
            rows.push(BaselineRow {
                key,
                learner: cells[learner_col].to_string(),
                values,
                best: flag("best")?,
                two_sample: flag("two_sample")?,
            });
        }
        Ok(Self { source, rows })
    }

    pub fn keys(&self) -> Vec<String> {
        let mut k: Vec<String> = Vec::new();
        for r in &self.rows {
            if !k.contains(&r.key) {
                k.push(r.key.clone());
            }
        }
        k
    }

    pub fn row(&self, key: &str, learner: &str) -> Result<&BaselineRow> {
        let want = normalize_key(key);
        self.rows
            .iter()
            .find(|r| normalize_key(&r.key) == want && r.learner.eq_ignore_ascii_case(learner))
            .ok_or_else(|| GhostError::UnknownKey {
                source_name: format!("{} ({learner})", self.source),
                key: key.to_string(),
                available: self.keys().join(", "),
            })
    }

    pub fn value(&self, key: &str, learner: &str, metric: &str) -> Result<f64> {
        let row = self.row(key, learner)?;
        row.values.get(&metric.to_ascii_lowercase()).copied().ok_or_else(|| GhostError::UnknownKey {
            source_name: format!("{} metrics", self.source),
            key: metric.to_string(),
            available: row.values.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }
}

/// The reference learner's published value: DODGE for the DODGE table,
/// Wang et al. otherwise.
pub fn lookup(source: BaselineSource, key: &str, metric: &str) -> Result<f64> {
    BaselineTable::load(source)?.value(key, source.reference_learner(), metric)
}

/// Published win/tie/loss counts, keyed by `(comparison, column)`.
pub fn published_summaries() -> Result<BTreeMap<(String, String), WtlCounts>> {
    let text = verified("published_summaries", SUMMARIES_CSV, SUMMARIES_SHA256)?;
    let mut out = BTreeMap::new();
    for line in data_lines(text).skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        let n = |i: usize| -> Result<usize> {
            c.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GhostError::Registry(format!("published_summaries: bad row '{line}'")))
        };
        out.insert(
            (c[0].to_string(), c[1].to_string()),
            WtlCounts {
                win: n(2)?,
                tie: n(3)?,
                loss: n(4)?,
            },
        );
    }
    Ok(out)
}

/// Metrics of the DODGE table, with their direction.
pub const DODGE_METRICS: [(&str, bool); 4] = [("auc", true), ("recall", true), ("popt20", true), ("pf", false)];

/// GHOST against DODGE using only the published points. The tie radius is
/// 0.3 times the population standard deviation of every DODGE and GHOST
/// value in the table.
pub fn stored_ghost_vs_dodge() -> Result<(PointStatsParams, Vec<ComparisonRow>)> {
    let t = BaselineTable::load(BaselineSource::DodgeTable5)?;
    let pooled: Vec<f64> = t
        .rows
        .iter()
        .filter(|r| r.learner == "DODGE" || r.learner == "GHOST")
        .flat_map(|r| r.values.values().copied())
        .collect();
    let params = PointStatsParams::from_values(&pooled)?;
    let mut rows = Vec::new();
    for key in t.keys() {
        for (m, maximize) in DODGE_METRICS {
            let ours = t.value(&key, "GHOST", m)?;
            let theirs = t.value(&key, "DODGE", m)?;
            rows.push(ComparisonRow {
                key: key.clone(),
                metric: m.to_string(),
                ours,
                theirs,
                verdict: point_compare(ours, theirs, &params, maximize),
            });
        }
    }
    Ok((params, rows))
}

/// GHOST against Wang et al. on F1 using only the published points and the
/// published tie radius for that table.
pub fn stored_ghost_vs_wang(source: BaselineSource) -> Result<(PointStatsParams, Vec<ComparisonRow>)> {
    let delta = match source {
        BaselineSource::WangWpdpTable6 => WPDP_DELTA,
        BaselineSource::WangCpdpTable7 => CPDP_DELTA,
        BaselineSource::DodgeTable5 => {
            return Err(GhostError::InvalidParameter("use stored_ghost_vs_dodge for the DODGE table".into()))
        }
    };
    let params = PointStatsParams::from_delta(delta)?;
    let t = BaselineTable::load(source)?;
    let rows = t
        .keys()
        .into_iter()
        .map(|key| {
            let ours = t.value(&key, "ghost", "f1")?;
            let theirs = t.value(&key, "wang", "f1")?;
            Ok(ComparisonRow {
                metric: "f1".into(),
                verdict: point_compare(ours, theirs, &params, true),
                key,
                ours,
                theirs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((params, rows))
}

/// The verdict implied by the published bold flags for a pair of rows.
pub fn published_verdict(ours_best: bool, theirs_best: bool) -> Verdict {
    match (ours_best, theirs_best) {
        (true, false) => Verdict::Win,
        (false, true) => Verdict::Loss,
        _ => Verdict::Tie,
    }
}
