//! Training-set oversamplers: fuzzy sampling, SMOTE and random duplication.
//!
//! Every sampler keeps the input rows untouched and in order, then appends
//! synthetic rows labelled with the current minority class. Synthetic rows
//! inherit `loc` from the row they were generated from.

use std::collections::HashMap;

use log::warn;
use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_stats, ClassBalance, ClassStats, DefectDataset};
use crate::error::{GhostError, Result};

/// Largest accepted fuzzing radius.
pub const MAX_DELTA_R: f64 = 0.1;
/// Radii above this value risk pushing synthetic points past majority rows.
pub const TRESPASS_WARN_DELTA_R: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyParams {
    /// Offset step added to every coordinate, on the normalised scale.
    pub delta_r: f64,
    /// When true, each of `x - iΔr` and `x + iΔr` is added `floor((1/n)/2^i)`
    /// times. When false, that many points are added in total, alternating
    /// between the two directions.
    pub per_direction: bool,
    pub seed: u64,
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self {
            delta_r: 0.01,
            per_direction: true,
            seed: 0,
        }
    }
}

impl FuzzyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_DELTA_R).contains(&self.delta_r) {
            return Err(GhostError::InvalidParameter(format!(
                "delta_r must lie in [0, {MAX_DELTA_R}], got {}",
                self.delta_r
            )));
        }
        if self.delta_r > TRESPASS_WARN_DELTA_R {
            warn!(
                "delta_r = {} exceeds {TRESPASS_WARN_DELTA_R}; synthetic points may trespass into the majority class",
                self.delta_r
            );
        }
        Ok(())
    }
}

/// Repeat counts `floor((1/n)/2^i)` for `i = 0, 1, ...` while they stay >= 1,
/// with `n = minority / total`. Computed in integers so the floor is exact.
pub fn fuzzy_repeat_counts(total: usize, minority: usize) -> Vec<usize> {
    let mut counts = Vec::new();
    if minority == 0 {
        return counts;
    }
    let mut denom = minority;
    loop {
        let c = total / denom;
        if c < 1 {
            break;
        }
        counts.push(c);
        denom = match denom.checked_mul(2) {
            Some(d) => d,
            None => break,
        };
    }
    counts
}

/// Number of synthetic rows fuzzy sampling adds for each minority sample.
pub fn fuzzy_synthetic_per_sample(total: usize, minority: usize, per_direction: bool) -> usize {
    let s: usize = fuzzy_repeat_counts(total, minority).iter().sum();
    if per_direction {
        2 * s
    } else {
        s
    }
}

fn binary_stats(ds: &DefectDataset, what: &str) -> Result<Option<ClassStats>> {
    match class_stats(ds)? {
        ClassBalance::Binary(s) => Ok(Some(s)),
        ClassBalance::SingleClass { label, .. } => {
            warn!("{what}: training data holds only label {label}; returning it unchanged");
            Ok(None)
        }
    }
}

/// Fuzzy sampling: adds shifted copies `x ± iΔr` of every minority row,
/// repeated `floor((1/n)/2^i)` times, for shrinking `floor >= 1`.
pub fn fuzzy_sample(train: &DefectDataset, params: &FuzzyParams) -> Result<DefectDataset> {
    params.validate()?;
    let Some(stats) = binary_stats(train, "fuzzy sampling")? else {
        return Ok(train.clone());
    };
    let counts = fuzzy_repeat_counts(train.len(), stats.minority_count);
    let per_sample = fuzzy_synthetic_per_sample(train.len(), stats.minority_count, params.per_direction);
    let d = train.n_features();
    let x = train.features();
    let total_new = per_sample * stats.minority_count;
    let mut rows = Vec::with_capacity(total_new * d);
    let mut loc = Vec::with_capacity(total_new);
    let mut names = Vec::with_capacity(total_new);

    let mut push = |src: ArrayView1<f64>, offset: f64, row: usize, tag: &str| {
        rows.extend(src.iter().map(|v| v + offset));
        loc.push(train.loc()[row]);
        names.push(format!("{}~fuzz{tag}", train.names()[row]));
    };
    for (r, &label) in train.labels().iter().enumerate() {
        if label != stats.minority_label {
            continue;
        }
        let src = x.row(r);
        for (i, &c) in counts.iter().enumerate() {
            let off = i as f64 * params.delta_r;
            if params.per_direction {
                for _ in 0..c {
                    push(src, -off, r, &format!("{i}-"));
                    push(src, off, r, &format!("{i}+"));
                }
            } else {
                for k in 0..c {
                    if k % 2 == 0 {
                        push(src, -off, r, &format!("{i}-"));
                    } else {
                        push(src, off, r, &format!("{i}+"));
                    }
                }
            }
        }
    }
    let n_new = loc.len();
    let rows = Array2::from_shape_vec((n_new, d), rows).expect("row width is d");
    train.append_rows(rows, vec![stats.minority_label; n_new], loc, names)
}

/// The twoSample path: a first fuzzy pass that reverses the imbalance, then
/// a second pass on whichever class is now the minority.
pub fn two_sample_fuzzy(train: &DefectDataset, params: &FuzzyParams) -> Result<DefectDataset> {
    let once = fuzzy_sample(train, params)?;
    fuzzy_sample(&once, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteParams {
    pub neighbors: usize,
    /// Desired minority/majority ratio after synthesis.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors < 1 {
            return Err(GhostError::InvalidParameter("SMOTE needs at least one neighbour".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(GhostError::InvalidParameter(format!(
                "SMOTE target_ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distinct minority points with their multiplicities.
struct UniquePool {
    rows: Vec<usize>,
    counts: Vec<usize>,
    /// Unique id of every pool member.
    of_member: Vec<usize>,
}

impl UniquePool {
    fn new(x: &Array2<f64>, pool: &[usize]) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let (mut rows, mut counts, mut of_member) = (Vec::new(), Vec::new(), Vec::with_capacity(pool.len()));
        for &r in pool {
            let key: Vec<u64> = x.row(r).iter().map(|v| v.to_bits()).collect();
            let u = *index.entry(key).or_insert_with(|| {
                rows.push(r);
                counts.push(0);
                rows.len() - 1
            });
            counts[u] += 1;
            of_member.push(u);
        }
        Self { rows, counts, of_member }
    }

    /// Row indices of the `k` nearest other pool members of unique point `u`,
    /// counting duplicates individually. Copies of `u` itself come first at
    /// distance zero; remaining ties resolve to the earlier unique point.
    fn nearest(&self, x: &Array2<f64>, u: usize, k: usize) -> Vec<usize> {
        let me = x.row(self.rows[u]);
        let mut d: Vec<(f64, usize)> = (0..self.rows.len())
            .filter(|&v| v != u)
            .map(|v| (squared_distance(me, x.row(self.rows[v])), v))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out: Vec<usize> = std::iter::repeat_n(self.rows[u], (self.counts[u] - 1).min(k)).collect();
        for (_, v) in d {
            if out.len() >= k {
                break;
            }
            let take = self.counts[v].min(k - out.len());
            out.extend(std::iter::repeat_n(self.rows[v], take));
        }
        out
    }
}

/// SMOTE: interpolates between minority rows and their nearest minority
/// neighbours until minority/majority reaches the target ratio. The class
/// that is currently smaller is treated as the minority.
pub fn smote(train: &DefectDataset, params: &SmoteParams) -> Result<DefectDataset> {
    params.validate()?;
    let Some(stats) = binary_stats(train, "SMOTE")? else {
        return Ok(train.clone());
    };
    let wanted = (params.target_ratio * stats.majority_count as f64).ceil() as usize;
    if wanted <= stats.minority_count {
        return Ok(train.clone());
    }
    let deficit = wanted - stats.minority_count;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pool: Vec<usize> = (0..train.len())
        .filter(|&r| train.labels()[r] == stats.minority_label)
        .collect();
    if pool.len() < 2 {
        warn!("SMOTE: fewer than two minority rows; duplicating instead");
        return duplicate_rows(train, &pool, deficit, stats.minority_label, &mut rng, "dup");
    }

    let x = train.features();
    let d = train.n_features();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    let uniq = UniquePool::new(x, &pool);
    let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; uniq.rows.len()];

    let mut rows = Vec::with_capacity(deficit * d);
    let mut loc = Vec::with_capacity(deficit);
    let mut names = Vec::with_capacity(deficit);
    for j in 0..deficit {
        let i = order[j % order.len()];
        let u_id = uniq.of_member[i];
        let nn = neighbor_cache[u_id].get_or_insert_with(|| uniq.nearest(x, u_id, params.neighbors));
        let pick = nn[rng.random_range(0..nn.len())];
        let u: f64 = rng.random();
        let (a, b) = (x.row(pool[i]), x.row(pick));
        rows.extend(a.iter().zip(b.iter()).map(|(av, bv)| av + u * (bv - av)));
        loc.push(train.loc()[pool[i]]);
        names.push(format!("{}~smote{j}", train.names()[pool[i]]));
    }
    let rows = Array2::from_shape_vec((deficit, d), rows).expect("row width is d");
    train.append_rows(rows, vec![stats.minority_label; deficit], loc, names)
}

fn duplicate_rows(
    train: &DefectDataset,
    pool: &[usize],
    count: usize,
    label: u8,
    rng: &mut ChaCha8Rng,
    tag: &str,
) -> Result<DefectDataset> {
    let picks: Vec<usize> = (0..count).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    let extra = train.select_rows(&picks);
    let names = picks
        .iter()
        .enumerate()
        .map(|(j, &r)| format!("{}~{tag}{j}", train.names()[r]))
        .collect();
    train.append_rows(extra.features().clone(), vec![label; count], extra.loc().to_vec(), names)
}

/// Random oversampling: duplicates uniformly chosen minority rows until both
/// classes have the same count.
pub fn random_oversample(train: &DefectDataset, seed: u64) -> Result<DefectDataset> {
    let Some(stats) = binary_stats(train, "random oversampling")? else {
        return Ok(train.clone());
    };
    let deficit = stats.majority_count - stats.minority_count;
    if deficit == 0 {
        return Ok(train.clone());
    }
    let pool: Vec<usize> = (0..train.len())
        .filter(|&r| train.labels()[r] == stats.minority_label)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    duplicate_rows(train, &pool, deficit, stats.minority_label, &mut rng, "dup")
}

/// Fraction of synthetic rows (those past `original.len()`) whose nearest
/// original row carries a different label.
pub fn trespass_fraction(original: &DefectDataset, resampled: &DefectDataset) -> Option<f64> {
    let m = original.len();
    if resampled.len() <= m || m == 0 {
        return None;
    }
    let xo = original.features();
    let xr = resampled.features();
    let mut trespass = 0usize;
    for s in m..resampled.len() {
        let row = xr.row(s);
        let (_, nearest) = (0..m)
            .map(|r| (squared_distance(row, xo.row(r)), r))
            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best });
        if original.labels()[nearest] != resampled.labels()[s] {
            trespass += 1;
        }
    }
    Some(trespass as f64 / (resampled.len() - m) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<f64>, y: Vec<u8>) -> DefectDataset {
        DefectDataset::from_parts(x, y).unwrap()
    }

    #[test]
    fn repeat_counts_by_hand() {
        assert_eq!(fuzzy_repeat_counts(4, 1), vec![4, 2, 1]);
        assert_eq!(fuzzy_repeat_counts(4, 2), vec![2, 1]);
        assert_eq!(fuzzy_repeat_counts(10, 3), vec![3, 1]);
        assert!(fuzzy_repeat_counts(4, 0).is_empty());
    }

    #[test]
    fn fuzzy_one_minority_in_four() {
        let train = ds(array![[0.5, 0.5], [0.1, 0.1], [0.2, 0.2], [0.3, 0.3]], vec![1, 0, 0, 0]);
        let out = fuzzy_sample(&train, &FuzzyParams::default()).unwrap();
        assert_eq!(out.len(), 4 + 14);
        assert!(out.labels()[4..].iter().all(|&l| l == 1));
        // i = 2 offsets appear once each direction
        let v: Vec<f64> = out.features().column(0).to_vec();
        assert!(v.iter().any(|&a| (a - 0.48).abs() < 1e-12));
        assert!(v.iter().any(|&a| (a - 0.52).abs() < 1e-12));
    }

    #[test]
    fn fuzzy_balanced_reverses_balance() {
        let train = ds(array![[0.5], [0.6], [0.1], [0.2]], vec![1, 1, 0, 0]);
        let out = fuzzy_sample(&train, &FuzzyParams::default()).unwrap();
        assert_eq!(out.len(), 4 + 2 * 6);
        assert_eq!(out.count_label(1), 14);
        assert_eq!(out.count_label(0), 2);
    }

    #[test]
    fn zero_radius_duplicates() {
        let train = ds(array![[0.5, 0.25], [0.1, 0.1], [0.2, 0.2]], vec![1, 0, 0]);
        let p = FuzzyParams {
            delta_r: 0.0,
            ..Default::default()
        };
        let out = fuzzy_sample(&train, &p).unwrap();
        for r in 3..out.len() {
            assert_eq!(out.features().row(r), train.features().row(0));
        }
    }

    #[test]
    fn combined_interpretation_halves_count() {
        let train = ds(array![[0.5], [0.1], [0.2], [0.3]], vec![1, 0, 0, 0]);
        let p = FuzzyParams {
            per_direction: false,
            ..Default::default()
        };
        assert_eq!(fuzzy_sample(&train, &p).unwrap().len(), 4 + 7);
    }

    #[test]
    fn delta_r_range() {
        let p = FuzzyParams {
            delta_r: 0.2,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = FuzzyParams {
            delta_r: -0.01,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn single_class_is_noop() {
        let train = ds(array![[0.5], [0.1]], vec![0, 0]);
        assert_eq!(fuzzy_sample(&train, &FuzzyParams::default()).unwrap(), train);
        assert_eq!(smote(&train, &SmoteParams::default()).unwrap(), train);
        assert_eq!(random_oversample(&train, 1).unwrap(), train);
    }

    #[test]
    fn smote_on_diagonal() {
        let train = ds(
            array![[0.0, 0.0], [1.0, 1.0], [0.3, 0.9], [0.8, 0.1], [0.2, 0.6], [0.9, 0.4]],
            vec![1, 1, 0, 0, 0, 0],
        );
        let p = SmoteParams {
            neighbors: 1,
            ..Default::default()
        };
        let out = smote(&train, &p).unwrap();
        assert_eq!(out.len(), 8);
        for r in 6..8 {
            let row = out.features().row(r);
            assert!((row[0] - row[1]).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&row[0]));
            assert_eq!(out.labels()[r], 1);
        }
        assert_eq!(out.count_label(1), out.count_label(0));
    }

    #[test]
    fn smote_balanced_unchanged() {
        let train = ds(array![[0.0], [1.0], [0.5], [0.7]], vec![1, 1, 0, 0]);
        assert_eq!(smote(&train, &SmoteParams::default()).unwrap(), train);
    }

    #[test]
    fn smote_single_minority_duplicates() {
        let train = ds(array![[0.3], [0.0], [1.0], [0.7]], vec![1, 0, 0, 0]);
        let out = smote(&train, &SmoteParams::default()).unwrap();
        assert_eq!(out.count_label(1), 3);
        assert!(out.features().column(0).iter().skip(4).all(|&v| v == 0.3));
    }

    #[test]
    fn random_oversample_examples() {
        let train = ds(array![[9.0], [0.0], [1.0], [2.0], [3.0]], vec![1, 0, 0, 0, 0]);
        let out = random_oversample(&train, 3).unwrap();
        assert_eq!(out.count_label(1), 4);
        assert_eq!(
            out.features().column(0).iter().filter(|&&v| v == 9.0).count(),
            4
        );

        let x = Array2::from_shape_fn((12, 1), |(r, _)| r as f64);
        let mut y = vec![0u8; 12];
        y[..3].fill(1);
        let out = random_oversample(&ds(x, y), 5).unwrap();
        assert_eq!(out.count_label(1), 9);
        assert!(out.features().column(0).iter().skip(12).all(|&v| v < 3.0));
    }

    #[test]
    fn trespass_detects_crossings() {
        let train = ds(array![[0.5], [0.52]], vec![1, 0]);
        let near = FuzzyParams {
            delta_r: 0.0,
            ..Default::default()
        };
        let out = fuzzy_sample(&train, &near).unwrap();
        assert_eq!(trespass_fraction(&train, &out), Some(0.0));
        let far = FuzzyParams {
            delta_r: 0.03,
            ..Default::default()
        };
        let out = fuzzy_sample(&train, &far).unwrap();
        assert!(trespass_fraction(&train, &out).unwrap() > 0.0);
    }
}
