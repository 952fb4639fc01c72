//! Feedforward binary classifier: ReLU hidden layers, one sigmoid output,
//! class-weighted cross-entropy, full-batch gradient descent.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_stats, ClassBalance, DefectDataset};
use crate::error::{GhostError, Result};

/// Clamp applied to probabilities inside the logarithms of the loss.
pub const LOSS_EPS: f64 = 1e-7;
const OUTPUT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layers: usize,
    pub units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Scalar `w`; minority rows are weighted by `w / n` when `weighted`.
    pub loss_weight: f64,
    pub weighted: bool,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            units: 20,
            epochs: 30,
            learning_rate: DEFAULT_LEARNING_RATE,
            loss_weight: 1.0,
            weighted: false,
            seed: 0,
        }
    }
}

/// Step size for the mean-normalised loss. See [`Network::train`].
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 || self.units < 1 || self.epochs < 1 {
            return Err(GhostError::InvalidParameter(format!(
                "layers, units and epochs must be >= 1 (got {}, {}, {})",
                self.layers, self.units, self.epochs
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GhostError::InvalidParameter(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.loss_weight > 0.0 && self.loss_weight.is_finite()) {
            return Err(GhostError::InvalidParameter(format!(
                "loss_weight must be positive, got {}",
                self.loss_weight
            )));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one prediction, with `p` clamped to
/// `[LOSS_EPS, 1 - LOSS_EPS]`.
pub fn bce(y: u8, p: f64) -> f64 {
    let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `(w/n) * sum_{y = c0} l + sum_{y != c0} l` with `c0 = minority_label`.
pub fn weighted_loss(y: &[u8], yhat: &[f64], w: f64, n: f64, minority_label: u8) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(GhostError::Dimension {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if !(n > 0.0 && n <= 1.0) {
        return Err(GhostError::InvalidParameter(format!(
            "minority fraction must lie in (0, 1], got {n}"
        )));
    }
    let has_min = y.contains(&minority_label);
    let has_maj = y.iter().any(|&l| l != minority_label);
    if !(has_min && has_maj) {
        return Err(GhostError::SingleClass);
    }
    let factor = w / n;
    Ok(y
        .iter()
        .zip(yhat)
        .map(|(&yi, &pi)| {
            let l = bce(yi, pi);
            if yi == minority_label {
                factor * l
            } else {
                l
            }
        })
        .sum())
}

/// Per-row loss weights for `labels`: `factor` on the minority, 1 elsewhere.
pub fn row_weights(labels: &[u8], minority_label: u8, factor: f64) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == minority_label { factor } else { 1.0 })
        .collect()
}

/// Merges identical `(row, label)` pairs into one row carrying the summed
/// weight. The weighted loss and its gradient are unchanged, and oversampled
/// training sets shrink to their distinct rows.
pub fn collapse_duplicates(x: ArrayView2<f64>, y: &[u8], s: &[f64]) -> (Array2<f64>, Vec<u8>, Vec<f64>) {
    let mut index: HashMap<(Vec<u64>, u8), usize> = HashMap::with_capacity(x.nrows());
    let mut keep = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (r, row) in x.rows().into_iter().enumerate() {
        let key = (row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y[r]);
        match index.get(&key) {
            Some(&u) => weights[u] += s[r],
            None => {
                index.insert(key, keep.len());
                keep.push(r);
                weights.push(s[r]);
            }
        }
    }
    let labels = keep.iter().map(|&r| y[r]).collect();
    (x.select(Axis(0), &keep), labels, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// `W[l]` has shape `fan_in x fan_out`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &NetConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim < 1 {
            return Err(GhostError::InvalidParameter("input_dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(config.units, config.layers));
        dims.push(1);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fi, fo) = (pair[0], pair[1]);
            let s = (6.0 / (fi + fo) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fi, fo), |_| rng.random_range(-s..=s)));
            biases.push(Array1::zeros(fo));
        }
        Ok(Self { weights, biases })
    }

    /// Checks that the layer shapes chain and end in one output unit.
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(GhostError::InvalidParameter(
                "need one bias vector per weight matrix".into(),
            ));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != b.len() {
                return Err(GhostError::Dimension {
                    expected: w.ncols(),
                    got: b.len(),
                });
            }
            if l > 0 && weights[l - 1].ncols() != w.nrows() {
                return Err(GhostError::Dimension {
                    expected: weights[l - 1].ncols(),
                    got: w.nrows(),
                });
            }
        }
        let last = weights.last().expect("non-empty");
        if last.ncols() != 1 {
            return Err(GhostError::Dimension {
                expected: 1,
                got: last.ncols(),
            });
        }
        Ok(Self { weights, biases })
    }

    pub fn zeroed(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(GhostError::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Activations of every layer, input first, sigmoid output last.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            z += b;
            if l == last {
                z.mapv_inplace(|v| sigmoid(v).clamp(OUTPUT_EPS, 1.0 - OUTPUT_EPS));
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut acts = self.activations(x);
        Ok(acts.pop().expect("output layer").column(0).to_owned())
    }

    pub fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .forward(x)?
            .iter()
            .map(|&p| u8::from(p >= threshold))
            .collect())
    }

    /// `sum_i s_i * bce(y_i, yhat_i)` and its gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[u8], s: &[f64]) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if y.len() != x.nrows() || s.len() != x.nrows() {
            return Err(GhostError::Dimension {
                expected: x.nrows(),
                got: y.len().min(s.len()),
            });
        }
        let acts = self.activations(x);
        let out = acts.last().expect("output");
        let mut loss = 0.0;
        let mut delta = Array2::zeros((x.nrows(), 1));
        for i in 0..x.nrows() {
            let p = out[[i, 0]];
            loss += s[i] * bce(y[i], p);
            delta[[i, 0]] = s[i] * (p - f64::from(y[i]));
        }
        let n_layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n_layers];
        let mut gb = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    /// Full-batch gradient descent for `config.epochs` epochs on the
    /// objective `sum_i s_i l_i / sum_i s_i`, where `s_i` is `w/n` for
    /// minority rows when weighting is on and 1 otherwise. Normalising by the
    /// total weight keeps one learning rate usable across dataset sizes and
    /// weight factors. Returns that objective as measured at the start of
    /// each epoch.
    pub fn train(&mut self, train: &DefectDataset, config: &NetConfig) -> Result<Vec<f64>> {
        config.validate()?;
        let stats = match class_stats(train)? {
            ClassBalance::Binary(s) => s,
            ClassBalance::SingleClass { .. } => return Err(GhostError::SingleClass),
        };
        let factor = if config.weighted {
            config.loss_weight / stats.minority_fraction
        } else {
            1.0
        };
        let s = row_weights(train.labels(), stats.minority_label, factor);
        let norm: f64 = s.iter().sum();
        let (x, y, s) = collapse_duplicates(train.features().view(), train.labels(), &s);
        let mut history = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            let (loss, g) = self.loss_and_gradient(x.view(), &y, &s)?;
            let loss = loss / norm;
            if !loss.is_finite() {
                return Err(GhostError::Diverged { epoch });
            }
            history.push(loss);
            let step = config.learning_rate / norm;
            for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
                w.scaled_add(-step, gw);
            }
            for (b, gb) in self.biases.iter_mut().zip(&g.biases) {
                b.scaled_add(-step, gb);
            }
            let finite = self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
                && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
            if !finite {
                return Err(GhostError::Diverged { epoch });
            }
        }
        Ok(history)
    }

    /// Plain-text dump: layer count, then for each layer the weight shape
    /// and row-major values, then the bias length and values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "layers {}", self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let _ = writeln!(out, "W {} {}", w.nrows(), w.ncols());
            for row in w.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
            let _ = writeln!(out, "b {}", b.len());
            let line: Vec<String> = b.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| GhostError::InvalidParameter(format!("model dump: {m}"));
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| tokens.next().ok_or_else(|| bad(&format!("missing {what}")));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad(&format!("bad integer '{t}'")));
        let real = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad real '{t}'")));
        if next("header")? != "layers" {
            return Err(bad("expected 'layers'"));
        }
        let n = num(next("layer count")?)?;
        let (mut weights, mut biases) = (Vec::new(), Vec::new());
        for _ in 0..n {
            if next("W")? != "W" {
                return Err(bad("expected 'W'"));
            }
            let r = num(next("rows")?)?;
            let c = num(next("cols")?)?;
            let vals = (0..r * c).map(|_| real(next("weight")?)).collect::<Result<Vec<_>>>()?;
            weights.push(Array2::from_shape_vec((r, c), vals).map_err(|e| bad(&e.to_string()))?);
            if next("b")? != "b" {
                return Err(bad("expected 'b'"));
            }
            let len = num(next("bias length")?)?;
            let vals = (0..len).map(|_| real(next("bias")?)).collect::<Result<Vec<_>>>()?;
            biases.push(Array1::from(vals));
        }
        Self::from_parts(weights, biases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn hand_net() -> Network {
        Network::from_parts(
            vec![array![[2.0]], array![[1.0]]],
            vec![array![-1.0], array![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn init_shapes_and_determinism() {
        let cfg = NetConfig {
            seed: 9,
            ..Default::default()
        };
        let a = Network::init(&cfg, 20).unwrap();
        let b = Network::init(&cfg, 20).unwrap();
        assert_eq!(a, b);
        let shapes: Vec<_> = a.weights.iter().map(|w| w.dim()).collect();
        assert_eq!(shapes, vec![(20, 20), (20, 20), (20, 1)]);
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        let s = (6.0f64 / 40.0).sqrt();
        assert!(a.weights[0].iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn hand_forward() {
        let net = hand_net();
        let y = net.forward(array![[1.0]].view()).unwrap();
        assert!((y[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(net.predict(array![[1.0]].view(), 0.5).unwrap(), vec![1]);
        let relu = Network::from_parts(vec![array![[1.0]], array![[1.0]]], vec![array![0.0], array![0.0]]).unwrap();
        assert_eq!(relu.forward(array![[-3.0]].view()).unwrap()[0], 0.5);
    }

    #[test]
    fn zero_net_is_half() {
        let net = Network::init(&NetConfig::default(), 3).unwrap().zeroed();
        let x = array![[1.0, -2.0, 3.0], [0.0, 0.0, 9.0]];
        assert!(net.forward(x.view()).unwrap().iter().all(|&p| p == 0.5));
        assert_eq!(net.predict(x.view(), 0.5).unwrap(), vec![1, 1]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(hand_net().forward(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn loss_examples() {
        let l = weighted_loss(&[1, 0], &[0.8, 0.2], 1.0, 0.25, 1).unwrap();
        assert!((l - 5.0 * -(0.8f64.ln())).abs() < 1e-12);
        assert!((l - 1.1157).abs() < 1e-4);
        let plain: f64 = [bce(1, 0.8), bce(0, 0.3)].iter().sum();
        let l1 = weighted_loss(&[1, 0], &[0.8, 0.3], 0.5, 0.5, 1).unwrap();
        assert_eq!(l1, plain);
        assert!(weighted_loss(&[1, 1], &[0.8, 0.3], 1.0, 0.5, 1).is_err());
        assert!(weighted_loss(&[1, 0], &[0.8, 0.3], 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let net = Network::init(&NetConfig { seed: 4, layers: 2, units: 3, ..Default::default() }, 5).unwrap();
        let back = Network::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
    }

    /// 40 rows below the line `x1 = 0.3 + 0.5 x0` and 20 above it.
    fn separable() -> DefectDataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            rows.extend([t, 0.2 + 0.5 * t]);
            y.push(0);
            if i % 2 == 0 {
                rows.extend([t, 0.4 + 0.5 * t]);
                y.push(1);
            }
        }
        let x = Array2::from_shape_vec((y.len(), 2), rows).unwrap();
        DefectDataset::from_parts(x, y).unwrap()
    }

    #[test]
    fn learns_separable_set() {
        let ds = separable();
        let cfg = NetConfig {
            layers: 1,
            units: 8,
            epochs: 2000,
            learning_rate: 1.0,
            seed: 1,
            ..Default::default()
        };
        let mut net = Network::init(&cfg, 2).unwrap();
        let hist = net.train(&ds, &cfg).unwrap();
        assert_eq!(hist.len(), cfg.epochs);
        assert!(hist.last().unwrap() < &hist[0]);
        let pred = net.predict(ds.features().view(), 0.5).unwrap();
        let acc = pred.iter().zip(ds.labels()).filter(|(a, b)| a == b).count() as f64 / ds.len() as f64;
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let ds = separable();
        let cfg = NetConfig {
            epochs: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let mut net = Network::init(&cfg, 2).unwrap();
        let before = net.clone();
        let hist = net.train(&ds, &cfg).unwrap();
        assert_eq!(net, before);
        assert!(hist.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn huge_rate_reports_divergence() {
        let ds = separable();
        let cfg = NetConfig {
            epochs: 200,
            learning_rate: 1e300,
            ..Default::default()
        };
        let mut net = Network::init(&cfg, 2).unwrap();
        assert!(matches!(net.train(&ds, &cfg), Err(GhostError::Diverged { .. })));
    }
}
