//! Classification and effort-aware scores. Undefined values are `None`.

use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<Confusion> {
    if y_true.is_empty() {
        return Err(GhostError::EmptyDataset);
    }
    if y_true.len() != y_pred.len() {
        return Err(GhostError::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn recall(c: &Confusion) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn pf(c: &Confusion) -> Option<f64> {
    ratio(c.fp, c.fp + c.tn)
}

pub fn precision(c: &Confusion) -> Option<f64> {
    ratio(c.tp, c.tp + c.fp)
}

/// Harmonic mean of precision and recall, written as 2tp/(2tp+fp+fn) so a
/// learner that flags nothing scores 0 rather than undefined. Undefined only
/// when there are no true and no predicted defects.
pub fn f1(c: &Confusion) -> Option<f64> {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

/// Area under the ROC curve by trapezoidal integration over distinct score
/// thresholds. Tied scores form one diagonal step, which gives ties half
/// credit.
pub fn auc(scores: &[f64], y_true: &[u8]) -> Option<f64> {
    if scores.len() != y_true.len() {
        return None;
    }
    let pos = y_true.iter().filter(|&&y| y != 0).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut area2 = 0u128;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]].total_cmp(&s).is_eq() {
            if y_true[idx[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        prev_tp = tp;
        prev_fp = fp;
    }
    Some(area2 as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PoptOrdering {
    /// Predicted-defective modules first, ascending loc within each group.
    #[default]
    Predicted,
    /// Actually-defective modules first, ascending loc within each group.
    Actual,
}

/// Fraction of true defects found after inspecting modules up to 20% of
/// total loc. A module is inspected when the loc inspected before it is
/// still below the budget, so the module straddling the cutoff counts.
pub fn popt20(y_pred: &[u8], y_true: &[u8], loc: &[f64]) -> Option<f64> {
    popt_at(y_pred, y_true, loc, 0.2, PoptOrdering::Predicted)
}

pub fn popt_at(y_pred: &[u8], y_true: &[u8], loc: &[f64], budget: f64, ordering: PoptOrdering) -> Option<f64> {
    let n = y_true.len();
    if y_pred.len() != n || loc.len() != n {
        return None;
    }
    let defects = y_true.iter().filter(|&&y| y != 0).count();
    let total: f64 = loc.iter().sum();
    if defects == 0 || !(total > 0.0) {
        return None;
    }
    let key = match ordering {
        PoptOrdering::Predicted => y_pred,
        PoptOrdering::Actual => y_true,
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| (key[b] != 0).cmp(&(key[a] != 0)).then(loc[a].total_cmp(&loc[b])));
    let cutoff = budget * total;
    let mut used = 0.0;
    let mut found = 0usize;
    for &i in &idx {
        if used >= cutoff {
            break;
        }
        used += loc[i];
        if y_true[i] != 0 {
            found += 1;
        }
    }
    Some(found as f64 / defects as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSet {
    pub recall: Option<f64>,
    pub pf: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub popt20: Option<f64>,
}

impl ScoreSet {
    pub fn compute(y_true: &[u8], y_pred: &[u8], scores: &[f64], loc: &[f64]) -> Result<Self> {
        let c = confusion(y_true, y_pred)?;
        Ok(Self {
            recall: recall(&c),
            pf: pf(&c),
            precision: precision(&c),
            f1: f1(&c),
            auc: auc(scores, y_true),
            popt20: popt20(y_pred, y_true, loc),
        })
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Recall => self.recall,
            Metric::Pf => self.pf,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
            Metric::Auc => self.auc,
            Metric::Popt20 => self.popt20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recall,
    Pf,
    Precision,
    F1,
    Auc,
    Popt20,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Recall,
        Metric::Pf,
        Metric::Precision,
        Metric::F1,
        Metric::Auc,
        Metric::Popt20,
    ];

    /// Only the false-alarm rate is minimised.
    pub fn maximize(self) -> bool {
        !matches!(self, Metric::Pf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Pf => "pf",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
            Metric::Auc => "auc",
            Metric::Popt20 => "popt20",
        }
    }

    /// True when `a` is strictly better than `b` under this metric.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.maximize() {
            a > b
        } else {
            a < b
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = GhostError;

    fn from_str(s: &str) -> Result<Self> {
        let l = s.to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == l || (l == "popt" && *m == Metric::Popt20))
            .ok_or_else(|| GhostError::UnknownKey {
                source_name: "metrics".into(),
                key: s.into(),
                available: Metric::ALL.map(Metric::name).join(", "),
            })
    }
}
