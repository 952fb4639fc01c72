//! Two-input toy problem for looking at decision boundaries: a noisy,
//! imbalanced point cloud in `[-1, 1]^2` and a 2x2 network trained
//! under four treatments, each sampled on a regular grid.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{class_stats, ClassBalance, DefectDataset};
use crate::error::{GhostError, Result};
use crate::ghost::{derive_seed, FuzzyMode, Pipeline};
use crate::nn::{NetConfig, Network};
use crate::sampling::{FuzzyParams, SmoteParams};

const GRID_MIN: f64 = -1.0;
const GRID_MAX: f64 = 1.0;

/// Default share of the minority class.
pub const DEFAULT_MINORITY: f64 = 0.33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub rows: usize,
    /// Fraction of rows labelled 1.
    pub minority_fraction: f64,
    /// Standard deviation of the label noise added to the ranking score.
    pub noise: f64,
    pub resolution: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            rows: 300,
            minority_fraction: DEFAULT_MINORITY,
            noise: 0.5,
            resolution: 50,
            epochs: 100,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

/// Uniform points in `[-1, 1]^2`. The `minority_fraction * rows` points
/// with the largest noisy `x1 + x2` are labelled 1.
pub fn boundary_fixture(p: &BoundaryParams) -> Result<DefectDataset> {
    if p.rows < 4 {
        return Err(GhostError::InvalidParameter(format!("need at least 4 rows, got {}", p.rows)));
    }
    if !(p.minority_fraction > 0.0 && p.minority_fraction <= 0.5) {
        return Err(GhostError::InvalidParameter(format!(
            "minority fraction must lie in (0, 0.5], got {}",
            p.minority_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = Normal::new(0.0, p.noise.max(0.0)).map_err(|e| GhostError::InvalidParameter(e.to_string()))?;
    let mut x = Array2::zeros((p.rows, 2));
    let mut score = Vec::with_capacity(p.rows);
    for r in 0..p.rows {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        x[[r, 0]] = a;
        x[[r, 1]] = b;
        score.push(a + b + noise.sample(&mut rng));
    }
    let positives = ((p.minority_fraction * p.rows as f64).round() as usize).max(1);
    let mut order: Vec<usize> = (0..p.rows).collect();
    order.sort_by(|&i, &j| score[j].total_cmp(&score[i]));
    let mut labels = vec![0u8; p.rows];
    for &i in &order[..positives] {
        labels[i] = 1;
    }
    DefectDataset::from_parts(x, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemoTreatment {
    Vanilla,
    Weighted,
    WeightedFuzzy,
    Ghost,
}

impl DemoTreatment {
    pub const ALL: [DemoTreatment; 4] = [
        DemoTreatment::Vanilla,
        DemoTreatment::Weighted,
        DemoTreatment::WeightedFuzzy,
        DemoTreatment::Ghost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemoTreatment::Vanilla => "vanilla",
            DemoTreatment::Weighted => "weighted",
            DemoTreatment::WeightedFuzzy => "weighted_fuzzy",
            DemoTreatment::Ghost => "ghost",
        }
    }

    fn pipeline(self) -> Pipeline {
        match self {
            DemoTreatment::Vanilla | DemoTreatment::Weighted => Pipeline::NONE,
            DemoTreatment::WeightedFuzzy => Pipeline {
                fuzzy: Some(FuzzyMode::Single),
                ..Pipeline::NONE
            },
            DemoTreatment::Ghost => Pipeline {
                fuzzy: Some(FuzzyMode::Single),
                smote_k: Some(5),
                ..Pipeline::NONE
            },
        }
    }

    fn weighted(self) -> bool {
        !matches!(self, DemoTreatment::Vanilla)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub treatment: DemoTreatment,
    pub resolution: usize,
    /// Row-major over `x2` then `x1`, both from -1 to 1.
    pub probability: Vec<f64>,
}

impl BoundaryGrid {
    pub fn predicted(&self) -> impl Iterator<Item = u8> + '_ {
        self.probability.iter().map(|&p| u8::from(p >= 0.5))
    }

    /// Both labels appear somewhere on the grid.
    pub fn predicts_both(&self) -> bool {
        let mut seen = [false; 2];
        for p in self.predicted() {
            seen[p as usize] = true;
        }
        seen[0] && seen[1]
    }

    /// `kind,x1,x2,predicted,probability,label`: one `grid` row per cell and
    /// one `point` row per training point.
    pub fn to_csv(&self, points: &DefectDataset) -> String {
        let mut out = String::from("kind,x1,x2,predicted,probability,label\n");
        let coords = grid_coords(self.resolution);
        for (r, p) in self.probability.iter().enumerate() {
            let _ = writeln!(out, "grid,{},{},{},{p:.6},", coords[[r, 0]], coords[[r, 1]], u8::from(*p >= 0.5));
        }
        for (r, l) in points.labels().iter().enumerate() {
            let x = points.features();
            let _ = writeln!(out, "point,{:.6},{:.6},,,{l}", x[[r, 0]], x[[r, 1]]);
        }
        out
    }
}

fn grid_coords(resolution: usize) -> Array2<f64> {
    let step = (GRID_MAX - GRID_MIN) / (resolution.max(2) - 1) as f64;
    let mut g = Array2::zeros((resolution * resolution, 2));
    for j in 0..resolution {
        for i in 0..resolution {
            g[[j * resolution + i, 0]] = GRID_MIN + i as f64 * step;
            g[[j * resolution + i, 1]] = GRID_MIN + j as f64 * step;
        }
    }
    g
}

fn train_demo(data: &DefectDataset, t: DemoTreatment, p: &BoundaryParams, seed: u64) -> Result<Network> {
    let stats = match class_stats(data)? {
        ClassBalance::Binary(s) => s,
        ClassBalance::SingleClass { .. } => return Err(GhostError::SingleClass),
    };
    let cfg = NetConfig {
        layers: 2,
        units: 2,
        epochs: p.epochs,
        learning_rate: p.learning_rate,
        weighted: t.weighted(),
        loss_weight: stats.imbalance_ratio * stats.minority_fraction,
        seed,
    };
    let mut net = Network::init(&cfg, 2)?;
    net.train(data, &cfg)?;
    Ok(net)
}

/// Trains the 2x2 network under every treatment and samples each on a
/// `resolution x resolution` grid.
pub fn decision_grids(fixture: &DefectDataset, p: &BoundaryParams) -> Result<Vec<BoundaryGrid>> {
    if p.resolution < 2 {
        return Err(GhostError::InvalidParameter("grid resolution must be >= 2".into()));
    }
    let coords = grid_coords(p.resolution);
    DemoTreatment::ALL
        .iter()
        .map(|&t| {
            let seed = derive_seed(p.seed, 7);
            let fuzzy = FuzzyParams {
                seed,
                ..FuzzyParams::default()
            };
            let smote = SmoteParams {
                seed,
                ..SmoteParams::default()
            };
            let (data, _) = t.pipeline().apply(fixture, &fuzzy, &smote, seed)?;
            let net = train_demo(&data, t, p, seed)?;
            Ok(BoundaryGrid {
                treatment: t,
                resolution: p.resolution,
                probability: probabilities(&net, coords.view())?,
            })
        })
        .collect()
}

fn probabilities(net: &Network, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    Ok(net.forward(x)?.to_vec())
}
