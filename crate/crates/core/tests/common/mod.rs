//! Independent oracles shared by the property suite and the acceptance run.
//! Each `check_*` takes one generated case and returns a description of the
//! first mismatch.
#![allow(dead_code)]

use ghost_core::dataset::{class_stats, ClassBalance, DefectDataset};
use ghost_core::dodge::{dodge_optimize, DodgeParams, Epsilon, OptionSpace};
use ghost_core::metrics::{auc, Metric};
use ghost_core::nn::{bce, weighted_loss, NetConfig, Network};
use ghost_core::sampling::{fuzzy_sample, smote, FuzzyParams, SmoteParams};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random_range(lo..hi))
}

// ---------------------------------------------------------------- gradients

#[derive(Debug, Clone)]
pub struct GradCase {
    pub input_dim: usize,
    pub layers: usize,
    pub units: usize,
    pub rows: usize,
    pub seed: u64,
}

pub fn grad_case() -> impl Strategy<Value = GradCase> {
    (1usize..6, 1usize..4, 1usize..7, 2usize..16, any::<u64>()).prop_map(|(input_dim, layers, units, rows, seed)| GradCase {
        input_dim,
        layers,
        units,
        rows,
        seed,
    })
}

fn perturbed(net: &Network, layer: usize, bias: bool, i: usize, j: usize, delta: f64) -> Network {
    let mut n = net.clone();
    if bias {
        n.biases[layer][j] += delta;
    } else {
        n.weights[layer][[i, j]] += delta;
    }
    n
}

/// Signs of every hidden pre-activation, recomputed from the raw weights.
fn relu_pattern(net: &Network, x: &Array2<f64>) -> Vec<bool> {
    let mut a = x.clone();
    let mut out = Vec::new();
    for l in 0..net.weights.len() - 1 {
        let z = a.dot(&net.weights[l]) + &net.biases[l];
        out.extend(z.iter().map(|&v| v > 0.0));
        a = z.mapv(|v| v.max(0.0));
    }
    out
}

/// Finite-difference check of `sum_i s_i l_i` at one random parameter.
pub fn check_gradient(c: &GradCase) -> Check {
    let mut r = rng(c.seed);
    let cfg = NetConfig {
        layers: c.layers,
        units: c.units,
        seed: c.seed,
        ..NetConfig::default()
    };
    let mut net = Network::init(&cfg, c.input_dim).map_err(|e| e.to_string())?;
    for b in &mut net.biases {
        b.mapv_inplace(|_| r.random_range(-0.3..0.3));
    }
    let x = random_matrix(&mut r, c.rows, c.input_dim, -1.0, 1.0);
    let y: Vec<u8> = (0..c.rows).map(|_| r.random_range(0..2u8)).collect();
    let s: Vec<f64> = (0..c.rows).map(|_| r.random_range(0.5..3.0)).collect();
    let (_, g) = net.loss_and_gradient(x.view(), &y, &s).map_err(|e| e.to_string())?;

    // Central differences are meaningless across a ReLU kink, so pick a
    // coordinate whose perturbations leave every activation pattern intact.
    let h = 1e-4;
    let mut pick = None;
    for _ in 0..50 {
        let layer = r.random_range(0..net.weights.len());
        let use_bias = r.random_bool(0.3);
        let (shape_r, shape_c) = net.weights[layer].dim();
        let (i, j) = (r.random_range(0..shape_r), r.random_range(0..shape_c));
        let base = relu_pattern(&net, &x);
        let stable = [-2.0 * h, 2.0 * h].iter().all(|&d| relu_pattern(&perturbed(&net, layer, use_bias, i, j, d), &x) == base);
        if stable {
            pick = Some((layer, use_bias, i, j));
            break;
        }
    }
    let Some((layer, use_bias, i, j)) = pick else {
        return Err(format!("{c:?}: no kink-free coordinate found"));
    };
    let analytic = if use_bias { g.biases[layer][j] } else { g.weights[layer][[i, j]] };

    let loss_at = |delta: f64| -> f64 {
        perturbed(&net, layer, use_bias, i, j, delta)
            .loss_and_gradient(x.view(), &y, &s)
            .expect("same shapes")
            .0
    };
    // Fourth-order central difference keeps round-off small for tiny gradients.
    let numeric = (8.0 * (loss_at(h) - loss_at(-h)) - (loss_at(2.0 * h) - loss_at(-2.0 * h))) / (12.0 * h);
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        return Ok(());
    }
    let rel = (analytic - numeric).abs() / scale;
    if rel < 1e-4 {
        Ok(())
    } else {
        Err(format!("{c:?} layer {layer} ({i},{j}) bias={use_bias}: analytic {analytic} numeric {numeric} rel {rel}"))
    }
}

// ------------------------------------------------------ weighting = copying

#[derive(Debug, Clone)]
pub struct DupCase {
    pub rows: usize,
    pub copies: usize,
    pub seed: u64,
}

pub fn dup_case() -> impl Strategy<Value = DupCase> {
    (4usize..40, 1usize..8, any::<u64>()).prop_map(|(rows, copies, seed)| DupCase { rows, copies, seed })
}

/// With `w/n = k`, the weighted loss equals the plain loss over a set where
/// every minority row appears `k` times; the same holds for the network's
/// loss and gradient.
pub fn check_duplication(c: &DupCase) -> Check {
    let mut r = rng(c.seed);
    let mut y: Vec<u8> = (0..c.rows).map(|_| u8::from(r.random_bool(0.3))).collect();
    y[0] = 0;
    y[1] = 1;
    let ones = y.iter().filter(|&&v| v == 1).count();
    let minority_label = u8::from(ones * 2 <= c.rows);
    let minority = y.iter().filter(|&&v| v == minority_label).count();
    let n = minority as f64 / c.rows as f64;
    let k = c.copies as f64;
    let yhat: Vec<f64> = (0..c.rows).map(|_| r.random_range(0.01..0.99)).collect();

    let weighted = weighted_loss(&y, &yhat, k * n, n, minority_label).map_err(|e| e.to_string())?;
    let mut copied = 0.0;
    for (&yi, &pi) in y.iter().zip(&yhat) {
        let reps = if yi == minority_label { c.copies } else { 1 };
        for _ in 0..reps {
            copied += bce(yi, pi);
        }
    }
    if (weighted - copied).abs() > 1e-9 {
        return Err(format!("{c:?}: weighted {weighted} vs copied {copied}"));
    }

    let net = Network::init(
        &NetConfig {
            layers: 2,
            units: 4,
            seed: c.seed,
            ..NetConfig::default()
        },
        3,
    )
    .map_err(|e| e.to_string())?;
    let x = random_matrix(&mut r, c.rows, 3, 0.0, 1.0);
    let s: Vec<f64> = y.iter().map(|&l| if l == minority_label { k } else { 1.0 }).collect();
    let (lw, gw) = net.loss_and_gradient(x.view(), &y, &s).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for (i, &l) in y.iter().enumerate() {
        let reps = if l == minority_label { c.copies } else { 1 };
        rows.extend(std::iter::repeat_n(i, reps));
    }
    let xd = x.select(ndarray::Axis(0), &rows);
    let yd: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
    let (ld, gd) = net.loss_and_gradient(xd.view(), &yd, &vec![1.0; yd.len()]).map_err(|e| e.to_string())?;
    if (lw - ld).abs() > 1e-9 {
        return Err(format!("{c:?}: network loss {lw} vs {ld}"));
    }
    for (a, b) in gw.weights.iter().zip(&gd.weights) {
        if let Some(d) = a.iter().zip(b).map(|(p, q)| (p - q).abs()).find(|d| *d > 1e-9) {
            return Err(format!("{c:?}: weight gradient differs by {d}"));
        }
    }
    for (a, b) in gw.biases.iter().zip(&gd.biases) {
        if let Some(d) = a.iter().zip(b).map(|(p, q)| (p - q).abs()).find(|d| *d > 1e-9) {
            return Err(format!("{c:?}: bias gradient differs by {d}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------- AUC

#[derive(Debug, Clone)]
pub struct AucCase {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

pub fn auc_case() -> impl Strategy<Value = AucCase> {
    (2usize..=1000, 1u32..40, any::<bool>(), any::<u64>()).prop_map(|(n, levels, discrete, seed)| {
        let mut r = rng(seed);
        let scores = (0..n)
            .map(|_| {
                if discrete {
                    r.random_range(0..levels) as f64 / levels as f64
                } else {
                    r.random::<f64>()
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.3))).collect();
        labels[0] = 1;
        labels[1 % n] = 0;
        AucCase { scores, labels }
    })
}

/// Share of (positive, negative) pairs ranked correctly, ties counted half.
pub fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li == 0 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

pub fn check_auc(c: &AucCase) -> Check {
    let got = auc(&c.scores, &c.labels).ok_or("auc undefined")?;
    let want = auc_pairwise(&c.scores, &c.labels);
    if (got - want).abs() < 1e-9 {
        Ok(())
    } else {
        Err(format!("n={}: auc {got} vs pairwise {want}", c.labels.len()))
    }
}

// -------------------------------------------------------------------- fuzzy

#[derive(Debug, Clone)]
pub struct FuzzyCase {
    pub total: usize,
    pub minority: usize,
    pub dims: usize,
    pub delta_r: f64,
    pub seed: u64,
}

pub fn fuzzy_case() -> impl Strategy<Value = FuzzyCase> {
    (4usize..80, 1usize..5, 0.0f64..=0.1, any::<u64>())
        .prop_flat_map(|(total, dims, delta_r, seed)| {
            (Just(total), 1usize..=total / 2, Just(dims), Just(delta_r), Just(seed))
        })
        .prop_map(|(total, minority, dims, delta_r, seed)| FuzzyCase {
            total,
            minority,
            dims,
            delta_r,
            seed,
        })
}

/// Literal transcription of the loop: for i = 0, 1, ... while
/// floor((1/n)/2^i) >= 1, add x - iΔr and x + iΔr that many times each.
pub fn fuzzy_oracle_rows(x: &[f64], n: f64, delta_r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut i = 0i32;
    loop {
        let reps = ((1.0 / n) / 2f64.powi(i)).floor();
        if reps < 1.0 {
            break;
        }
        for _ in 0..reps as usize {
            out.push(x.iter().map(|v| v - f64::from(i) * delta_r).collect());
            out.push(x.iter().map(|v| v + f64::from(i) * delta_r).collect());
        }
        i += 1;
    }
    out
}

fn sorted_rows(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.sort_by(|a, b| a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    rows
}

pub fn check_fuzzy(c: &FuzzyCase) -> Check {
    let mut r = rng(c.seed);
    let x = random_matrix(&mut r, c.total, c.dims, 0.0, 1.0);
    let labels: Vec<u8> = (0..c.total).map(|i| u8::from(i < c.minority)).collect();
    let ds = DefectDataset::from_parts(x.clone(), labels).map_err(|e| e.to_string())?;
    let stats = match class_stats(&ds).map_err(|e| e.to_string())? {
        ClassBalance::Binary(s) => s,
        ClassBalance::SingleClass { .. } => return Err("single class".into()),
    };
    let params = FuzzyParams {
        delta_r: c.delta_r,
        per_direction: true,
        seed: c.seed,
    };
    let out = fuzzy_sample(&ds, &params).map_err(|e| e.to_string())?;
    let n = stats.minority_count as f64 / c.total as f64;
    let mut want = Vec::new();
    for row in 0..c.total {
        if ds.labels()[row] == stats.minority_label {
            want.extend(fuzzy_oracle_rows(&x.row(row).to_vec(), n, c.delta_r));
        }
    }
    if out.len() != c.total + want.len() {
        return Err(format!("{c:?}: {} synthetic rows, oracle {}", out.len() - c.total, want.len()));
    }
    if out.features().slice(ndarray::s![..c.total, ..]) != x {
        return Err(format!("{c:?}: original rows changed"));
    }
    if out.labels()[c.total..].iter().any(|&l| l != stats.minority_label) {
        return Err(format!("{c:?}: synthetic row with majority label"));
    }
    let got: Vec<Vec<f64>> = (c.total..out.len()).map(|i| out.features().row(i).to_vec()).collect();
    for (a, b) in sorted_rows(got).iter().zip(sorted_rows(want).iter()) {
        if a.iter().zip(b).any(|(p, q)| (p - q).abs() > 1e-12) {
            return Err(format!("{c:?}: synthetic row {a:?} vs oracle {b:?}"));
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- SMOTE

#[derive(Debug, Clone)]
pub struct SmoteCase {
    pub minority: usize,
    pub majority: usize,
    pub dims: usize,
    pub k: usize,
    pub seed: u64,
}

pub fn smote_case() -> impl Strategy<Value = SmoteCase> {
    (2usize..12, 1usize..30, 1usize..5, 1usize..6, any::<u64>()).prop_map(|(minority, extra, dims, k, seed)| SmoteCase {
        minority,
        majority: minority + extra,
        dims,
        k,
        seed,
    })
}

fn segment_residual(s: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (s.iter().zip(a).zip(&ab).map(|((sv, av), d)| (sv - av) * d).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    s.iter()
        .zip(a)
        .zip(&ab)
        .map(|((sv, av), d)| (sv - (av + t * d)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Every synthetic row lies on a segment between two minority rows, and the
/// classes end up the same size.
pub fn check_smote(c: &SmoteCase) -> Check {
    let mut r = rng(c.seed);
    let total = c.minority + c.majority;
    let x = random_matrix(&mut r, total, c.dims, 0.0, 1.0);
    let labels: Vec<u8> = (0..total).map(|i| u8::from(i < c.minority)).collect();
    let ds = DefectDataset::from_parts(x.clone(), labels).map_err(|e| e.to_string())?;
    let out = smote(
        &ds,
        &SmoteParams {
            neighbors: c.k,
            seed: c.seed,
            ..SmoteParams::default()
        },
    )
    .map_err(|e| e.to_string())?;
    if out.count_label(1) != out.count_label(0) || out.count_label(0) != c.majority {
        return Err(format!("{c:?}: counts {} / {}", out.count_label(1), out.count_label(0)));
    }
    let minority: Vec<Vec<f64>> = (0..c.minority).map(|i| x.row(i).to_vec()).collect();
    for row in total..out.len() {
        let s = out.features().row(row).to_vec();
        let best = minority
            .iter()
            .flat_map(|a| minority.iter().map(move |b| (a, b)))
            .map(|(a, b)| segment_residual(&s, a, b))
            .fold(f64::INFINITY, f64::min);
        if best >= 1e-9 {
            return Err(format!("{c:?}: row {row} is {best} from every minority segment"));
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- DODGE

/// A 3x3x3 grid with one optimum at `target`; the score drops with squared
/// distance, so no other cell ties with it.
pub fn dodge_grid_run(seed: u64) -> Result<(bool, usize), String> {
    let mut r = rng(seed ^ 0xd0d9e);
    let target = [r.random_range(0..3usize), r.random_range(0..3usize), r.random_range(0..3usize)];
    let space = OptionSpace::new(vec![0usize, 1, 2], vec![1, 2, 3], vec![1, 2, 3]).map_err(|e| e.to_string())?;
    let params = DodgeParams {
        n1: 12,
        n2: 30,
        epsilon: Epsilon::Absolute(0.01),
        goal: Metric::F1,
        seed,
    };
    let score = |p: usize, l: usize, u: usize| -> f64 {
        let d = [p as f64 - target[0] as f64, l as f64 - 1.0 - target[1] as f64, u as f64 - 1.0 - target[2] as f64];
        1.0 - (d[0] * d[0] + 2.0 * d[1] * d[1] + 3.0 * d[2] * d[2]) / 30.0
    };
    let out = dodge_optimize(&space, &params, |t, _| {
        Ok(score(*space.preprocessor(t), space.layers_of(t), space.units_of(t)))
    })
    .map_err(|e| e.to_string())?;
    let t = out.theta_star;
    let found = [*space.preprocessor(&t), space.layers_of(&t) - 1, space.units_of(&t) - 1] == target;
    Ok((found, out.trials.len()))
}
