//! Epsilon-domination tabu search over a three-dimensional option space:
//! preprocessor, hidden-layer count and units per layer.
//!
//! Every option value carries an integer weight starting at 0. After each
//! evaluation the three option values of the trial lose 1 when its score lies
//! within `epsilon` of an earlier score (or the trial failed) and gain 1
//! otherwise. Phase 1 samples configurations uniformly; phase 2 starts from
//! the best trial among those whose options currently weigh the most and
//! moves one dimension by a single step.

use std::collections::HashSet;
use std::fmt::{Display, Write as _};

use log::debug;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GhostError, Result};
use crate::metrics::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpace<P> {
    pub preprocessors: Vec<P>,
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
}

impl<P> OptionSpace<P> {
    pub fn new(preprocessors: Vec<P>, layers: Vec<usize>, units: Vec<usize>) -> Result<Self> {
        if preprocessors.is_empty() {
            return Err(GhostError::InvalidParameter("option space needs a preprocessor".into()));
        }
        if layers.is_empty() || units.is_empty() {
            return Err(GhostError::InvalidParameter("empty layers or units range".into()));
        }
        if layers.contains(&0) || units.contains(&0) {
            return Err(GhostError::InvalidParameter("layers and units must be >= 1".into()));
        }
        Ok(Self {
            preprocessors,
            layers,
            units,
        })
    }

    /// Builds the numeric dimensions from inclusive integer ranges.
    pub fn from_ranges(preprocessors: Vec<P>, layers: (usize, usize), units: (usize, usize)) -> Result<Self> {
        if layers.0 > layers.1 || units.0 > units.1 {
            return Err(GhostError::InvalidParameter("empty layers or units range".into()));
        }
        Self::new(
            preprocessors,
            (layers.0..=layers.1).collect(),
            (units.0..=units.1).collect(),
        )
    }

    fn dims(&self) -> [usize; 3] {
        [self.preprocessors.len(), self.layers.len(), self.units.len()]
    }

    pub fn space_size(&self) -> u128 {
        self.dims().iter().map(|&d| d as u128).product()
    }

    pub fn preprocessor(&self, theta: &Theta) -> &P {
        &self.preprocessors[theta.preprocessor]
    }

    pub fn layers_of(&self, theta: &Theta) -> usize {
        self.layers[theta.layers]
    }

    pub fn units_of(&self, theta: &Theta) -> usize {
        self.units[theta.units]
    }
}

/// A configuration as indices into the three option lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Theta {
    pub preprocessor: usize,
    pub layers: usize,
    pub units: usize,
}

impl Theta {
    fn coords(&self) -> [usize; 3] {
        [self.preprocessor, self.layers, self.units]
    }

    fn from_coords(c: [usize; 3]) -> Self {
        Self {
            preprocessor: c[0],
            layers: c[1],
            units: c[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Epsilon {
    Absolute(f64),
    /// Fraction of the score range observed in phase 1.
    RangeFraction(f64),
}

/// Floor for epsilon when phase 1 produced a single distinct score.
pub const MIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DodgeParams {
    pub n1: usize,
    pub n2: usize,
    pub epsilon: Epsilon,
    pub goal: Metric,
    pub seed: u64,
}

impl Default for DodgeParams {
    fn default() -> Self {
        Self {
            n1: 12,
            n2: 30,
            epsilon: Epsilon::RangeFraction(0.2),
            goal: Metric::F1,
            seed: 0,
        }
    }
}

impl DodgeParams {
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 1 {
            return Err(GhostError::InvalidParameter("n1 must be >= 1".into()));
        }
        let e = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::RangeFraction(e) => e,
        };
        if !(e > 0.0 && e.is_finite()) {
            return Err(GhostError::InvalidParameter(format!("epsilon must be positive, got {e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Random,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub phase: Phase,
    pub theta: Theta,
    /// `None` when the evaluation failed or returned a non-finite score.
    pub phi: Option<f64>,
    pub tabu: bool,
    /// Sum of the trial's three option weights after its own bookkeeping.
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DodgeOutcome {
    pub theta_star: Theta,
    pub phi_best: f64,
    pub epsilon: f64,
    pub trials: Vec<TrialRecord>,
}

struct Weights([Vec<i64>; 3]);

impl Weights {
    fn of(&self, t: &Theta) -> i64 {
        t.coords().iter().enumerate().map(|(d, &i)| self.0[d][i]).sum()
    }

    fn bump(&mut self, t: &Theta, by: i64) {
        for (d, &i) in t.coords().iter().enumerate() {
            self.0[d][i] += by;
        }
    }
}

/// Runs `n1 + n2` evaluations of `eval_fn` and returns the best one under
/// `params.goal`'s direction.
pub fn dodge_optimize<P, F>(space: &OptionSpace<P>, params: &DodgeParams, mut eval_fn: F) -> Result<DodgeOutcome>
where
    F: FnMut(&Theta, usize) -> Result<f64>,
{
    params.validate()?;
    let dims = space.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut weights = Weights(dims.map(|d| vec![0i64; d]));
    let mut seen: HashSet<Theta> = HashSet::new();
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(params.n1 + params.n2);
    let full = space.space_size() as usize;

    let mut evaluate = |theta: Theta, index: usize, phase: Phase| -> TrialRecord {
        let phi = match eval_fn(&theta, index) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                debug!("trial {index}: non-finite score {v}");
                None
            }
            Err(e) => {
                debug!("trial {index} failed: {e}");
                None
            }
        };
        TrialRecord {
            index,
            phase,
            theta,
            phi,
            tabu: false,
            weight: 0,
        }
    };

    for index in 0..params.n1 {
        let theta = if seen.len() < full {
            loop {
                let t = random_theta(dims, &mut rng);
                if !seen.contains(&t) {
                    break t;
                }
            }
        } else {
            random_theta(dims, &mut rng)
        };
        seen.insert(theta);
        trials.push(evaluate(theta, index, Phase::Random));
    }

    let epsilon = match params.epsilon {
        Epsilon::Absolute(e) => e,
        Epsilon::RangeFraction(f) => {
            let scores: Vec<f64> = trials.iter().filter_map(|t| t.phi).collect();
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = if scores.is_empty() { 0.0 } else { hi - lo };
            if range > 0.0 {
                f * range
            } else {
                MIN_EPSILON
            }
        }
    };

    for j in 0..trials.len() {
        book_keep(&mut trials, j, epsilon, &mut weights);
    }

    for step in 0..params.n2 {
        let index = params.n1 + step;
        let theta = refine(&trials, &weights, params.goal, dims, &seen, full, &mut rng);
        seen.insert(theta);
        trials.push(evaluate(theta, index, Phase::Refine));
        book_keep(&mut trials, index, epsilon, &mut weights);
    }

    let best = best_trial(&trials, params.goal).ok_or(GhostError::AllTrialsFailed)?;
    Ok(DodgeOutcome {
        theta_star: best.theta,
        phi_best: best.phi.expect("best trial has a score"),
        epsilon,
        trials,
    })
}

fn random_theta(dims: [usize; 3], rng: &mut ChaCha8Rng) -> Theta {
    Theta::from_coords(dims.map(|d| rng.random_range(0..d)))
}

fn book_keep(trials: &mut [TrialRecord], j: usize, epsilon: f64, weights: &mut Weights) {
    let tabu = match trials[j].phi {
        None => true,
        Some(pj) => trials[..j]
            .iter()
            .filter_map(|t| t.phi)
            .any(|pi| (pj - pi).abs() < epsilon),
    };
    weights.bump(&trials[j].theta, if tabu { -1 } else { 1 });
    trials[j].tabu = tabu;
    trials[j].weight = weights.of(&trials[j].theta);
}

/// First trial with the best score; failed trials never win.
pub fn best_trial(trials: &[TrialRecord], goal: Metric) -> Option<&TrialRecord> {
    let mut best: Option<&TrialRecord> = None;
    for t in trials {
        let Some(p) = t.phi else { continue };
        if best.is_none_or(|b| goal.better(p, b.phi.expect("scored"))) {
            best = Some(t);
        }
    }
    best
}

fn refine(
    trials: &[TrialRecord],
    weights: &Weights,
    goal: Metric,
    dims: [usize; 3],
    seen: &HashSet<Theta>,
    full: usize,
    rng: &mut ChaCha8Rng,
) -> Theta {
    let top = trials.iter().map(|t| weights.of(&t.theta)).max().expect("n1 >= 1");
    let heavy: Vec<&TrialRecord> = trials.iter().filter(|t| weights.of(&t.theta) == top).collect();
    let scored: Vec<f64> = heavy.iter().filter_map(|t| t.phi).collect();
    let incumbent = if scored.is_empty() {
        *heavy.choose(rng).expect("non-empty")
    } else {
        let best = scored
            .iter()
            .copied()
            .reduce(|a, b| if goal.better(b, a) { b } else { a })
            .expect("non-empty");
        let ties: Vec<&&TrialRecord> = heavy.iter().filter(|t| t.phi == Some(best)).collect();
        **ties.choose(rng).expect("non-empty")
    };

    let movable: Vec<usize> = (0..3).filter(|&d| dims[d] > 1).collect();
    if movable.is_empty() {
        return incumbent.theta;
    }
    for _ in 0..32 {
        let cand = mutate(&incumbent.theta, &movable, dims, rng);
        if !seen.contains(&cand) {
            return cand;
        }
    }
    if seen.len() < full {
        let unseen: Vec<Theta> = (0..dims[0])
            .flat_map(|p| (0..dims[1]).flat_map(move |l| (0..dims[2]).map(move |u| Theta::from_coords([p, l, u]))))
            .filter(|t| !seen.contains(t))
            .collect();
        if let Some(t) = unseen.choose(rng) {
            return *t;
        }
    }
    mutate(&incumbent.theta, &movable, dims, rng)
}

/// Preprocessor switches to another option; numeric dimensions move one step.
fn mutate(theta: &Theta, movable: &[usize], dims: [usize; 3], rng: &mut ChaCha8Rng) -> Theta {
    let mut c = theta.coords();
    let d = *movable.choose(rng).expect("non-empty");
    if d == 0 {
        let other = rng.random_range(0..dims[0] - 1);
        c[0] = if other >= c[0] { other + 1 } else { other };
    } else {
        let up = if c[d] == 0 {
            true
        } else if c[d] + 1 == dims[d] {
            false
        } else {
            rng.random_bool(0.5)
        };
        c[d] = if up { c[d] + 1 } else { c[d] - 1 };
    }
    Theta::from_coords(c)
}

/// One row per trial: index, phase, configuration, score, tabu flag, weight.
pub fn trial_log_csv<P: Display>(space: &OptionSpace<P>, trials: &[TrialRecord]) -> String {
    let mut out = String::from("index,phase,preprocessor,layers,units,phi,tabu,weight\n");
    for t in trials {
        let phase = match t.phase {
            Phase::Random => "random",
            Phase::Refine => "refine",
        };
        let phi = t.phi.map_or_else(|| "failed".to_string(), |p| format!("{p}"));
        let _ = writeln!(
            out,
            "{},{},\"{}\",{},{},{},{},{}",
            t.index,
            phase,
            space.preprocessor(&t.theta),
            space.layers_of(&t.theta),
            space.units_of(&t.theta),
            phi,
            t.tabu,
            t.weight
        );
    }
    out
}
