//! Scott-Knott ranking of result distributions and effect-size point
//! comparisons, with win/tie/loss summaries and table emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};

/// Effect size, in pooled standard deviations, below which two results are
/// treated as equivalent.
pub const SMALL_EFFECT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl ResultGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(GhostError::InvalidParameter(format!("group '{label}' has no values")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GhostError::InvalidParameter(format!("group '{label}' has a non-finite value")));
        }
        Ok(Self { label, values })
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_pop(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Linear-interpolation quantile, `q` in [0, 1].
pub fn quantile(v: &[f64], q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(s[lo] + (s[hi] - s[lo]) * (pos - lo as f64))
}

fn median_of(v: &[f64]) -> f64 {
    quantile(v, 0.5).expect("non-empty")
}

/// Scott-Knott ranks, one per input group in input order. Rank 1 holds the
/// lowest means; groups the recursion cannot separate share a rank.
///
/// Groups are sorted by mean (then median, then values). Each level splits
/// at the cut maximising `|m|/|l| (E[m]-E[l])^2 + |n|/|l| (E[n]-E[l])^2`
/// over pooled values, and keeps the split only when the two sides' means
/// differ by more than `SMALL_EFFECT` times the parent's population
/// standard deviation.
pub fn scott_knott(groups: &[ResultGroup]) -> Vec<usize> {
    if groups.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let (ga, gb) = (&groups[a], &groups[b]);
        ga.mean()
            .total_cmp(&gb.mean())
            .then(median_of(&ga.values).total_cmp(&median_of(&gb.values)))
            .then_with(|| {
                let mut va = ga.values.clone();
                let mut vb = gb.values.clone();
                va.sort_by(f64::total_cmp);
                vb.sort_by(f64::total_cmp);
                va.iter()
                    .zip(&vb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(va.len().cmp(&vb.len()))
            })
    });
    let mut leaves = Vec::new();
    split(groups, &order, &mut leaves);
    let mut ranks = vec![0; groups.len()];
    for (r, leaf) in leaves.iter().enumerate() {
        for &g in leaf {
            ranks[g] = r + 1;
        }
    }
    ranks
}

fn pooled(groups: &[ResultGroup], members: &[usize]) -> Vec<f64> {
    members.iter().flat_map(|&g| groups[g].values.iter().copied()).collect()
}

fn split(groups: &[ResultGroup], members: &[usize], leaves: &mut Vec<Vec<usize>>) {
    if members.len() < 2 {
        leaves.push(members.to_vec());
        return;
    }
    let all: Vec<f64> = pooled(groups, members);
    let (n_all, mu) = (all.len() as f64, mean(&all));
    let mut best: Option<(f64, usize)> = None;
    for cut in 1..members.len() {
        let left: Vec<f64> = pooled(groups, &members[..cut]);
        let right: Vec<f64> = pooled(groups, &members[cut..]);
        let (ml, mr) = (mean(&left), mean(&right));
        let e = left.len() as f64 / n_all * (ml - mu).powi(2) + right.len() as f64 / n_all * (mr - mu).powi(2);
        if best.is_none_or(|(b, _)| e > b) {
            best = Some((e, cut));
        }
    }
    let (_, cut) = best.expect("at least one cut");
    let left: Vec<f64> = pooled(groups, &members[..cut]);
    let right: Vec<f64> = pooled(groups, &members[cut..]);
    if (mean(&left) - mean(&right)).abs() > SMALL_EFFECT * std_pop(&all) {
        split(groups, &members[..cut], leaves);
        split(groups, &members[cut..], leaves);
    } else {
        leaves.push(members.to_vec());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointStatsParams {
    pub sigma: f64,
    pub delta: f64,
}

impl PointStatsParams {
    pub fn from_sigma(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(GhostError::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self {
            sigma,
            delta: SMALL_EFFECT * sigma,
        })
    }

    /// Sigma is the population standard deviation of every pooled value.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::from_sigma(std_pop(values))
    }

    /// Parameters reproducing a known tie radius `delta`.
    pub fn from_delta(delta: f64) -> Result<Self> {
        let mut p = Self::from_sigma(delta / SMALL_EFFECT)?;
        p.delta = delta;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Win,
    Tie,
    Loss,
}

impl Verdict {
    pub fn flip(self) -> Self {
        match self {
            Verdict::Win => Verdict::Loss,
            Verdict::Loss => Verdict::Win,
            Verdict::Tie => Verdict::Tie,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Win => "win",
            Verdict::Tie => "tie",
            Verdict::Loss => "loss",
        }
    }
}

/// Verdict for `a` against `b`: a tie when `|a - b| <= delta`, otherwise
/// the better value wins.
pub fn point_compare(a: f64, b: f64, params: &PointStatsParams, maximize: bool) -> Verdict {
    if (a - b).abs() <= params.delta {
        Verdict::Tie
    } else if (a > b) == maximize {
        Verdict::Win
    } else {
        Verdict::Loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WtlCounts {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl WtlCounts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Win => self.win += 1,
            Verdict::Tie => self.tie += 1,
            Verdict::Loss => self.loss += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.win + self.tie + self.loss
    }

    pub fn win_plus_tie(&self) -> usize {
        self.win + self.tie
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WtlSummary {
    pub per_metric: BTreeMap<String, WtlCounts>,
    pub total: WtlCounts,
}

pub fn wtl_summary<'a>(comparisons: impl IntoIterator<Item = (&'a str, Verdict)>) -> WtlSummary {
    let mut s = WtlSummary::default();
    for (metric, v) in comparisons {
        s.per_metric.entry(metric.to_string()).or_default().add(v);
        s.total.add(v);
    }
    s
}

/// One point comparison between our result and a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub key: String,
    pub metric: String,
    pub ours: f64,
    pub theirs: f64,
    pub verdict: Verdict,
}

impl ComparisonRow {
    /// Which side is flagged as best: both on a tie.
    pub fn winners(&self) -> (bool, bool) {
        match self.verdict {
            Verdict::Win => (true, false),
            Verdict::Tie => (true, true),
            Verdict::Loss => (false, true),
        }
    }
}

pub fn comparison_csv(rows: &[ComparisonRow], ours: &str, theirs: &str) -> String {
    let mut out = format!("key,metric,{ours},{theirs},verdict,{ours}_best,{theirs}_best\n");
    for r in rows {
        let (a, b) = r.winners();
        let _ = writeln!(out, "{},{},{},{},{},{a},{b}", r.key, r.metric, r.ours, r.theirs, r.verdict.as_str());
    }
    out
}

/// Markdown table; the best side of each row is bold.
pub fn comparison_markdown(rows: &[ComparisonRow], ours: &str, theirs: &str) -> String {
    let mut out = format!("| key | metric | {ours} | {theirs} | verdict |\n|---|---|---:|---:|---|\n");
    let cell = |v: f64, best: bool| if best { format!("**{v:.1}**") } else { format!("{v:.1}") };
    for r in rows {
        let (a, b) = r.winners();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.key,
            r.metric,
            cell(r.ours, a),
            cell(r.theirs, b),
            r.verdict.as_str()
        );
    }
    out
}

pub fn summary_markdown(s: &WtlSummary) -> String {
    let metrics: Vec<&String> = s.per_metric.keys().collect();
    let mut out = String::from("| |");
    for m in &metrics {
        let _ = write!(out, " {m} |");
    }
    out.push_str(" total |\n|---|");
    out.push_str(&"---:|".repeat(metrics.len() + 1));
    out.push('\n');
    type Pick = fn(&WtlCounts) -> usize;
    let lines: [(&str, Pick); 4] = [
        ("win", |c| c.win),
        ("tie", |c| c.tie),
        ("loss", |c| c.loss),
        ("win + tie", |c| c.win_plus_tie()),
    ];
    for (name, f) in lines {
        let _ = write!(out, "| {name} |");
        for m in &metrics {
            let _ = write!(out, " {} |", f(&s.per_metric[*m]));
        }
        let _ = writeln!(out, " {} |", f(&s.total));
    }
    out
}

pub fn summary_csv(s: &WtlSummary) -> String {
    let mut out = String::from("metric,win,tie,loss\n");
    for (m, c) in &s.per_metric {
        let _ = writeln!(out, "{m},{},{},{}", c.win, c.tie, c.loss);
    }
    let _ = writeln!(out, "total,{},{},{}", s.total.win, s.total.tie, s.total.loss);
    out
}

/// Groups with their Scott-Knott rank; the top rank is flagged as winner.
pub fn ranked_csv(groups: &[ResultGroup], ranks: &[usize]) -> String {
    let top = ranks.iter().copied().max().unwrap_or(0);
    let mut out = String::from("label,rank,n,median,iqr,mean,winner\n");
    for (g, &r) in groups.iter().zip(ranks) {
        let q = |p| quantile(&g.values, p).expect("non-empty");
        let _ = writeln!(
            out,
            "{},{r},{},{},{},{},{}",
            g.label,
            g.values.len(),
            q(0.5),
            q(0.75) - q(0.25),
            g.mean(),
            r == top
        );
    }
    out
}

pub fn ranked_markdown(groups: &[ResultGroup], ranks: &[usize]) -> String {
    let top = ranks.iter().copied().max().unwrap_or(0);
    let mut out = String::from("| label | rank | median | IQR |\n|---|---:|---:|---:|\n");
    for (g, &r) in groups.iter().zip(ranks) {
        let q = |p| quantile(&g.values, p).expect("non-empty");
        let med = if r == top { format!("**{:.1}**", q(0.5)) } else { format!("{:.1}", q(0.5)) };
        let _ = writeln!(out, "| {} | {r} | {med} | {:.1} |", g.label, q(0.75) - q(0.25));
    }
    out
}
