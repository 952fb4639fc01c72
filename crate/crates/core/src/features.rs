//! Correlation-based feature subset selection (CFS).

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_stats, ClassBalance, DefectDataset};
use crate::error::{GhostError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfsState {
    pub merit: f64,
    pub selected: Vec<usize>,
    /// |corr(feature, class)| per feature.
    pub r_cf: Vec<f64>,
    /// |corr(feature_i, feature_j)|, row-major `n_features x n_features`.
    pub r_ff: Vec<f64>,
    pub n_features: usize,
}

impl CfsState {
    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn r_ff_at(&self, i: usize, j: usize) -> f64 {
        self.r_ff[i * self.n_features + j]
    }

    /// Merit of an arbitrary subset under the cached correlations.
    pub fn subset_merit(&self, subset: &[usize]) -> f64 {
        let k = subset.len();
        if k == 0 {
            return 0.0;
        }
        let mean_cf = subset.iter().map(|&i| self.r_cf[i]).sum::<f64>() / k as f64;
        let mut ff = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in subset.iter().enumerate() {
            for &j in &subset[a + 1..] {
                ff += self.r_ff_at(i, j);
                pairs += 1;
            }
        }
        let mean_ff = if pairs == 0 { 0.0 } else { ff / pairs as f64 };
        merit(k, mean_cf, mean_ff)
    }
}

/// `k * r_cf / sqrt(k + k(k-1) * r_ff)` for mean correlations `r_cf`, `r_ff`.
pub fn merit(k: usize, mean_r_cf: f64, mean_r_ff: f64) -> f64 {
    let k = k as f64;
    let denom = (k + k * (k - 1.0) * mean_r_ff).sqrt();
    if denom > 0.0 {
        k * mean_r_cf / denom
    } else {
        0.0
    }
}

/// Absolute Pearson correlation; zero when either side is constant.
pub fn abs_pearson(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).abs().min(1.0)
}

/// Greedy forward CFS. Starts from the feature with the largest `r_cf` and
/// keeps adding the single feature that most improves merit until none does.
pub fn cfs_select(train: &DefectDataset) -> Result<CfsState> {
    let d = train.n_features();
    if d < 2 {
        return Err(GhostError::InvalidParameter(format!(
            "CFS needs at least 2 features, got {d}"
        )));
    }
    if let ClassBalance::SingleClass { .. } = class_stats(train)? {
        return Err(GhostError::SingleClass);
    }
    let x = train.features();
    let y: ndarray::Array1<f64> = train.labels().iter().map(|&l| f64::from(l)).collect();
    let r_cf: Vec<f64> = (0..d).map(|j| abs_pearson(x.column(j), y.view())).collect();
    let mut r_ff = vec![0.0; d * d];
    for i in 0..d {
        r_ff[i * d + i] = 1.0;
        for j in i + 1..d {
            let r = abs_pearson(x.column(i), x.column(j));
            r_ff[i * d + j] = r;
            r_ff[j * d + i] = r;
        }
    }
    let mut state = CfsState {
        merit: 0.0,
        selected: Vec::new(),
        r_cf,
        r_ff,
        n_features: d,
    };

    let first = argmax_lowest(&state.r_cf).expect("d >= 2");
    state.selected.push(first);
    state.merit = state.subset_merit(&state.selected);
    loop {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..d {
            if state.selected.contains(&j) {
                continue;
            }
            let mut cand = state.selected.clone();
            cand.push(j);
            let m = state.subset_merit(&cand);
            if best.is_none_or(|(bm, _)| m > bm) {
                best = Some((m, j));
            }
        }
        match best {
            Some((m, j)) if m > state.merit => {
                state.selected.push(j);
                state.merit = m;
            }
            _ => break,
        }
    }
    Ok(state)
}

fn argmax_lowest(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}
