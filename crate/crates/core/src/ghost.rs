//! End-to-end pipeline: normalise, resample the training data, tune the
//! preprocessor and architecture with tabu search on a validation fold,
//! retrain on all training data and score the untouched test set.

use std::fmt;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_stats, normalize_features, ClassBalance, DefectDataset};
use crate::dodge::{dodge_optimize, DodgeParams, OptionSpace, Theta};
use crate::error::{GhostError, Result};
use crate::features::cfs_select;
use crate::metrics::{Metric, ScoreSet};
use crate::nn::{NetConfig, Network};
use crate::sampling::{fuzzy_sample, random_oversample, smote, two_sample_fuzzy, FuzzyParams, SmoteParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FuzzyMode {
    Single,
    TwoSample,
}

/// How minority rows are weighted in the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossWeighting {
    None,
    /// Minority rows weighted by `w / n`.
    Scaled { w: f64 },
    /// Minority rows weighted by the majority/minority ratio, which has the
    /// same effect as duplicating them until the classes balance.
    ImbalanceRatio,
}

/// One preprocessing option: transforms applied to a training fold, in the
/// order CFS, random oversampling, fuzzy sampling, SMOTE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub cfs: bool,
    pub random_oversample: bool,
    pub fuzzy: Option<FuzzyMode>,
    /// SMOTE neighbour count, when SMOTE is applied.
    pub smote_k: Option<usize>,
}

impl Pipeline {
    pub const NONE: Pipeline = Pipeline {
        cfs: false,
        random_oversample: false,
        fuzzy: None,
        smote_k: None,
    };

    pub fn with_two_sample(mut self) -> Self {
        if self.fuzzy.is_some() {
            self.fuzzy = Some(FuzzyMode::TwoSample);
        }
        self
    }

    /// Applies the pipeline to `fold`. Returns the transformed data and the
    /// columns kept by CFS, if it ran.
    pub fn apply(
        &self,
        fold: &DefectDataset,
        fuzzy: &FuzzyParams,
        smote_params: &SmoteParams,
        seed: u64,
    ) -> Result<(DefectDataset, Option<Vec<usize>>)> {
        let mut data = fold.clone();
        let mut columns = None;
        if self.cfs {
            let mut keep = cfs_select(&data)?.selected;
            keep.sort_unstable();
            data = data.select_columns(&keep);
            columns = Some(keep);
        }
        if self.random_oversample {
            data = random_oversample(&data, seed ^ 0x5eed_0001)?;
        }
        match self.fuzzy {
            Some(FuzzyMode::Single) => data = fuzzy_sample(&data, fuzzy)?,
            Some(FuzzyMode::TwoSample) => data = two_sample_fuzzy(&data, fuzzy)?,
            None => {}
        }
        if let Some(k) = self.smote_k {
            let p = SmoteParams {
                neighbors: k,
                seed: seed ^ 0x5eed_0002,
                ..*smote_params
            };
            data = smote(&data, &p)?;
        }
        Ok((data, columns))
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.cfs {
            parts.push("cfs".to_string());
        }
        if self.random_oversample {
            parts.push("oversample".to_string());
        }
        match self.fuzzy {
            Some(FuzzyMode::Single) => parts.push("fuzzy".to_string()),
            Some(FuzzyMode::TwoSample) => parts.push("fuzzy2".to_string()),
            None => {}
        }
        if let Some(k) = self.smote_k {
            parts.push(format!("smote(k={k})"));
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// Which components a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Treatment {
    pub weighting: LossWeighting,
    pub random_oversample: bool,
    pub fuzzy: bool,
    pub smote: bool,
    pub tuning: bool,
    /// Rerun with two fuzzy passes when the tuned score falls below `tau`.
    pub two_sample_fallback: bool,
}

impl Treatment {
    /// Every component, including the fallback.
    pub const GHOST: Treatment = Treatment {
        weighting: LossWeighting::Scaled { w: 1.0 },
        random_oversample: false,
        fuzzy: true,
        smote: true,
        tuning: true,
        two_sample_fallback: true,
    };

    pub const PLAIN: Treatment = Treatment {
        weighting: LossWeighting::None,
        random_oversample: false,
        fuzzy: false,
        smote: false,
        tuning: false,
        two_sample_fallback: false,
    };

    fn base_pipeline(&self, smote_k: usize) -> Pipeline {
        Pipeline {
            cfs: false,
            random_oversample: self.random_oversample,
            fuzzy: self.fuzzy.then_some(FuzzyMode::Single),
            smote_k: self.smote.then_some(smote_k),
        }
    }
}

/// The rows of the component ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AblationRow(u8);

impl AblationRow {
    pub const ALL: [AblationRow; 8] = [
        AblationRow(1),
        AblationRow(2),
        AblationRow(3),
        AblationRow(4),
        AblationRow(5),
        AblationRow(6),
        AblationRow(7),
        AblationRow(8),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(GhostError::UnknownKey {
                source_name: "ablation rows".into(),
                key: id.to_string(),
                available: "1-8".into(),
            })
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "DL",
            2 => "DL + weighted loss (oversampling emulation)",
            3 => "DL + weighted loss + SMOTE + fuzzy",
            4 => "DL + weighted loss + SMOTE + tuning",
            5 => "DL + SMOTE + fuzzy + tuning",
            6 => "DL + weighted loss + fuzzy + tuning",
            7 => "DL + weighted loss + SMOTE + fuzzy + tuning",
            _ => "DL + weighted loss + SMOTE + fuzzy + tuning + twoSample",
        }
    }

    pub fn treatment(self) -> Treatment {
        let w = LossWeighting::Scaled { w: 1.0 };
        let t = Treatment::PLAIN;
        match self.0 {
            1 => t,
            2 => Treatment {
                weighting: LossWeighting::ImbalanceRatio,
                ..t
            },
            3 => Treatment {
                weighting: w,
                fuzzy: true,
                smote: true,
                ..t
            },
            4 => Treatment {
                weighting: w,
                smote: true,
                tuning: true,
                ..t
            },
            5 => Treatment {
                fuzzy: true,
                smote: true,
                tuning: true,
                ..t
            },
            6 => Treatment {
                weighting: w,
                fuzzy: true,
                tuning: true,
                ..t
            },
            7 => Treatment {
                two_sample_fallback: false,
                ..Treatment::GHOST
            },
            _ => Treatment::GHOST,
        }
    }
}

impl fmt::Display for AblationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Candidate hidden-layer counts searched by the tuner.
pub const TUNED_LAYERS: [usize; 4] = [1, 2, 3, 4];
/// Candidate units per hidden layer searched by the tuner.
pub const TUNED_UNITS: [usize; 5] = [4, 8, 12, 16, 20];
/// SMOTE neighbour counts offered to the tuner.
pub const TUNED_SMOTE_K: [usize; 3] = [3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhostParams {
    pub tau: f64,
    /// Start with two fuzzy passes instead of waiting for the fallback.
    pub two_sample: bool,
    pub fuzzy: FuzzyParams,
    pub smote: SmoteParams,
    pub dodge: DodgeParams,
    /// Epochs, learning rate and loss weight; the architecture fields are
    /// used only when tuning is off.
    pub net: NetConfig,
    pub repeats: usize,
    /// Share of the training data held out for scoring tuning trials.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for GhostParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            two_sample: false,
            fuzzy: FuzzyParams::default(),
            smote: SmoteParams::default(),
            dodge: DodgeParams::default(),
            net: NetConfig::default(),
            repeats: 20,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl GhostParams {
    pub fn goal(&self) -> Metric {
        self.dodge.goal
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau < 1.0) {
            return Err(GhostError::InvalidParameter(format!("tau must lie in [0, 1), got {}", self.tau)));
        }
        if self.repeats < 1 {
            return Err(GhostError::InvalidParameter("repeats must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(GhostError::InvalidParameter(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        self.fuzzy.validate()?;
        self.smote.validate()?;
        self.dodge.validate()?;
        self.net.validate()
    }
}

/// A resolved configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaDesc {
    pub pipeline: Pipeline,
    pub layers: usize,
    pub units: usize,
}

impl fmt::Display for ThetaDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}x{}", self.pipeline, self.layers, self.units)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub theta: ThetaDesc,
    /// Goal score of `theta` on the validation fold, when tuning ran.
    pub validation_score: Option<f64>,
    pub test: ScoreSet,
    pub trials: usize,
    /// Seconds spent in the final training on the full training set.
    pub train_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub goal: Metric,
    /// Most frequent configuration across repeats (earliest on ties).
    pub theta_star: ThetaDesc,
    pub repeats: Vec<RepeatResult>,
    pub median: ScoreSet,
    pub median_validation: Option<f64>,
    pub two_sample_used: bool,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test_checksum: String,
    pub total_seconds: f64,
}

impl RunResult {
    pub fn metric_values(&self, metric: Metric) -> Vec<f64> {
        self.repeats.iter().filter_map(|r| r.test.get(metric)).collect()
    }
}

/// Median of the defined values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

fn median_scores(sets: &[ScoreSet]) -> ScoreSet {
    let med = |m: Metric| median(&sets.iter().filter_map(|s| s.get(m)).collect::<Vec<_>>());
    ScoreSet {
        recall: med(Metric::Recall),
        pf: med(Metric::Pf),
        precision: med(Metric::Precision),
        f1: med(Metric::F1),
        auc: med(Metric::Auc),
        popt20: med(Metric::Popt20),
    }
}

/// Splits row indices into `(keep, holdout)`, drawing `holdout_fraction` of
/// each class, rounded, with at least one row of each class on both sides
/// whenever the class has two or more rows.
pub fn stratified_split(labels: &[u8], holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut keep, mut hold) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        rows.shuffle(&mut rng);
        let n = rows.len();
        let mut h = (holdout_fraction * n as f64).round() as usize;
        if n >= 2 {
            h = h.clamp(1, n - 1);
        } else {
            h = 0;
        }
        hold.extend_from_slice(&rows[..h]);
        keep.extend_from_slice(&rows[h..]);
    }
    keep.sort_unstable();
    hold.sort_unstable();
    (keep, hold)
}

/// Draws `fraction` of each class (at least one row per present class).
pub fn stratified_subsample(labels: &[u8], fraction: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let take = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len());
        out.extend_from_slice(&rows[..take]);
    }
    out.sort_unstable();
    out
}

/// Mixes a base seed with a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The tuner's option space for a treatment.
pub fn option_space(treatment: &Treatment, two_sample: bool) -> Result<OptionSpace<Pipeline>> {
    let mut pipes = Vec::new();
    let ks: Vec<Option<usize>> = if treatment.smote {
        TUNED_SMOTE_K.iter().map(|&k| Some(k)).collect()
    } else {
        vec![None]
    };
    for k in ks {
        for cfs in [false, true] {
            let mut p = treatment.base_pipeline(0);
            p.smote_k = k;
            p.cfs = cfs;
            if two_sample {
                p = p.with_two_sample();
            }
            pipes.push(p);
        }
    }
    OptionSpace::new(pipes, TUNED_LAYERS.to_vec(), TUNED_UNITS.to_vec())
}

/// Trains a network for `theta` on an already preprocessed set.
fn fit(data: &DefectDataset, layers: usize, units: usize, weighting: LossWeighting, base: &NetConfig, seed: u64) -> Result<Network> {
    let stats = match class_stats(data)? {
        ClassBalance::Binary(s) => s,
        ClassBalance::SingleClass { .. } => return Err(GhostError::SingleClass),
    };
    let (weighted, loss_weight) = match weighting {
        LossWeighting::None => (false, 1.0),
        LossWeighting::Scaled { w } => (true, w),
        LossWeighting::ImbalanceRatio => (true, stats.imbalance_ratio * stats.minority_fraction),
    };
    let cfg = NetConfig {
        layers,
        units,
        weighted,
        loss_weight,
        seed,
        ..*base
    };
    let mut net = Network::init(&cfg, data.n_features())?;
    net.train(data, &cfg)?;
    Ok(net)
}

fn score(net: &Network, data: &DefectDataset, columns: &Option<Vec<usize>>) -> Result<ScoreSet> {
    let view = match columns {
        Some(c) => data.select_columns(c),
        None => data.clone(),
    };
    let p = net.forward(view.features().view())?;
    let pred: Vec<u8> = p.iter().map(|&v| u8::from(v >= 0.5)).collect();
    ScoreSet::compute(view.labels(), &pred, p.as_slice().expect("contiguous"), view.loc())
}

fn one_repeat(
    train: &DefectDataset,
    test: &DefectDataset,
    treatment: &Treatment,
    params: &GhostParams,
    two_sample: bool,
    repeat: usize,
) -> Result<RepeatResult> {
    let started = Instant::now();
    let seed = derive_seed(params.seed, repeat as u64);
    let goal = params.goal();

    let (theta, validation_score, trials) = if treatment.tuning {
        let space = option_space(treatment, two_sample)?;
        let (keep, hold) = stratified_split(train.labels(), params.validation_fraction, seed);
        let tune = train.select_rows(&keep);
        let valid = train.select_rows(&hold);
        let dodge = DodgeParams {
            seed: derive_seed(seed, 1),
            ..params.dodge
        };
        let outcome = dodge_optimize(&space, &dodge, |t: &Theta, i| {
            let pipe = space.preprocessor(t);
            let trial_seed = derive_seed(seed, 100 + i as u64);
            let (data, cols) = pipe.apply(&tune, &params.fuzzy, &params.smote, trial_seed)?;
            let net = fit(&data, space.layers_of(t), space.units_of(t), treatment.weighting, &params.net, trial_seed)?;
            score(&net, &valid, &cols)?
                .get(goal)
                .ok_or_else(|| GhostError::InvalidParameter(format!("{goal} undefined on validation fold")))
        })?;
        let t = outcome.theta_star;
        (
            ThetaDesc {
                pipeline: *space.preprocessor(&t),
                layers: space.layers_of(&t),
                units: space.units_of(&t),
            },
            Some(outcome.phi_best),
            outcome.trials.len(),
        )
    } else {
        let mut pipeline = treatment.base_pipeline(params.smote.neighbors);
        if two_sample {
            pipeline = pipeline.with_two_sample();
        }
        (
            ThetaDesc {
                pipeline,
                layers: params.net.layers,
                units: params.net.units,
            },
            None,
            0,
        )
    };

    let final_seed = derive_seed(seed, 2);
    let (data, cols) = theta.pipeline.apply(train, &params.fuzzy, &params.smote, final_seed)?;
    let t0 = Instant::now();
    let net = fit(&data, theta.layers, theta.units, treatment.weighting, &params.net, final_seed)?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let test_scores = score(&net, test, &cols)?;
    Ok(RepeatResult {
        repeat,
        seed,
        theta,
        validation_score,
        test: test_scores,
        trials,
        train_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

fn mode_theta(repeats: &[RepeatResult]) -> ThetaDesc {
    let mut best = (0usize, repeats[0].theta);
    for r in repeats {
        let c = repeats.iter().filter(|o| o.theta == r.theta).count();
        if c > best.0 {
            best = (c, r.theta);
        }
    }
    best.1
}

/// Goal score on a "higher is better" scale, for the `tau` check.
fn goodness(goal: Metric, v: f64) -> f64 {
    if goal.maximize() {
        v
    } else {
        1.0 - v
    }
}

fn run_once(
    train: &DefectDataset,
    test: &DefectDataset,
    treatment: &Treatment,
    params: &GhostParams,
    two_sample: bool,
    label: &str,
) -> Result<RunResult> {
    let started = Instant::now();
    let repeats: Vec<RepeatResult> = (0..params.repeats)
        .into_par_iter()
        .map(|r| one_repeat(train, test, treatment, params, two_sample, r))
        .collect::<Result<Vec<_>>>()?;
    let sets: Vec<ScoreSet> = repeats.iter().map(|r| r.test).collect();
    let vals: Vec<f64> = repeats.iter().filter_map(|r| r.validation_score).collect();
    Ok(RunResult {
        label: label.to_string(),
        goal: params.goal(),
        theta_star: mode_theta(&repeats),
        median: median_scores(&sets),
        median_validation: median(&vals),
        repeats,
        two_sample_used: two_sample,
        train_rows: train.len(),
        test_rows: test.len(),
        test_checksum: String::new(),
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs `treatment` on a train/test pair. Features are min-max scaled with
/// training statistics; the caller's test set is never modified, which is
/// verified by checksum.
pub fn run_treatment(train: &DefectDataset, test: &DefectDataset, treatment: &Treatment, params: &GhostParams) -> Result<RunResult> {
    params.validate()?;
    if train.n_features() != test.n_features() {
        return Err(GhostError::Dimension {
            expected: train.n_features(),
            got: test.n_features(),
        });
    }
    if let ClassBalance::SingleClass { label, .. } = class_stats(train)? {
        warn!("training data holds only label {label}");
        return Err(GhostError::SingleClass);
    }
    let before = test.checksum();
    let started = Instant::now();
    let (train_n, test_n, _) = normalize_features(train, test)?;
    let label = format!("{} -> {}", train.source().label(), test.source().label());

    let mut result = run_once(&train_n, &test_n, treatment, params, params.two_sample, &label)?;
    if treatment.two_sample_fallback && !params.two_sample {
        let g = result.median_validation.map(|v| goodness(params.goal(), v));
        if g.is_some_and(|g| g < params.tau) {
            info!("{label}: median validation {} below tau {}; rerunning with twoSample", params.goal(), params.tau);
            result = run_once(&train_n, &test_n, treatment, params, true, &label)?;
        }
    }
    let after = test.checksum();
    if before != after {
        return Err(GhostError::InvalidParameter("test set changed during the run".into()));
    }
    result.test_checksum = after;
    result.total_seconds = started.elapsed().as_secs_f64();
    Ok(result)
}

/// The full pipeline with the twoSample fallback.
pub fn ghost_run(train: &DefectDataset, test: &DefectDataset, params: &GhostParams) -> Result<RunResult> {
    run_treatment(train, test, &Treatment::GHOST, params)
}

pub fn ablation_run(train: &DefectDataset, test: &DefectDataset, row: AblationRow, params: &GhostParams) -> Result<RunResult> {
    run_treatment(train, test, &row.treatment(), params)
}

/// Trains on one project and tests on another.
pub fn cross_project_run(source: &DefectDataset, target: &DefectDataset, params: &GhostParams) -> Result<RunResult> {
    if source.source().project == target.source().project {
        return Err(GhostError::InvalidParameter(format!(
            "cross-project run needs two projects, got {} twice",
            source.source().project
        )));
    }
    ghost_run(source, target, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityRow {
    pub fraction: f64,
    pub rows: usize,
    pub seconds: Vec<f64>,
    pub median_seconds: f64,
}

/// Times one training of `net` on stratified subsamples of `train` at each
/// fraction, `repeats` times each.
pub fn scalability_probe(train: &DefectDataset, fractions: &[f64], net: &NetConfig, repeats: usize, seed: u64) -> Result<Vec<ScalabilityRow>> {
    if repeats < 1 {
        return Err(GhostError::InvalidParameter("repeats must be >= 1".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(GhostError::InvalidParameter(format!("fractions must lie in (0, 1], got {f}")));
    }
    let mut out = Vec::with_capacity(fractions.len());
    for (fi, &f) in fractions.iter().enumerate() {
        let rows = stratified_subsample(train.labels(), f, derive_seed(seed, fi as u64));
        let sub = train.select_rows(&rows);
        let (sub, _, _) = normalize_features(&sub, &sub)?;
        let mut seconds = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let cfg = NetConfig {
                seed: derive_seed(seed, 1000 + r as u64),
                ..*net
            };
            let mut model = Network::init(&cfg, sub.n_features())?;
            let t0 = Instant::now();
            model.train(&sub, &cfg)?;
            seconds.push(t0.elapsed().as_secs_f64());
        }
        out.push(ScalabilityRow {
            fraction: f,
            rows: sub.len(),
            median_seconds: median(&seconds).expect("repeats >= 1"),
            seconds,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_treatments() {
        assert!(AblationRow::new(0).is_err());
        assert!(AblationRow::new(9).is_err());
        let r1 = AblationRow::new(1).unwrap().treatment();
        assert_eq!(r1, Treatment::PLAIN);
        let r8 = AblationRow::new(8).unwrap().treatment();
        assert_eq!(r8, Treatment::GHOST);
        let r7 = AblationRow::new(7).unwrap().treatment();
        assert!(!r7.two_sample_fallback && r7.tuning && r7.fuzzy && r7.smote);
        let r5 = AblationRow::new(5).unwrap().treatment();
        assert_eq!(r5.weighting, LossWeighting::None);
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 5 == 0)).collect();
        let (keep, hold) = stratified_split(&labels, 0.2, 3);
        assert_eq!(keep.len() + hold.len(), 50);
        assert_eq!(hold.iter().filter(|&&r| labels[r] == 1).count(), 2);
        assert_eq!(hold.iter().filter(|&&r| labels[r] == 0).count(), 8);
        assert!(keep.iter().all(|r| !hold.contains(r)));
    }

    #[test]
    fn median_helper() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn option_space_for_full_treatment() {
        let s = option_space(&Treatment::GHOST, false).unwrap();
        assert_eq!(s.preprocessors.len(), 6);
        assert_eq!(s.space_size(), 6 * 4 * 5);
        let s2 = option_space(&Treatment::GHOST, true).unwrap();
        assert!(s2.preprocessors.iter().all(|p| p.fuzzy == Some(FuzzyMode::TwoSample)));
    }

    #[test]
    fn pipeline_display() {
        let p = Pipeline {
            cfs: true,
            fuzzy: Some(FuzzyMode::Single),
            smote_k: Some(5),
            ..Pipeline::NONE
        };
        assert_eq!(p.to_string(), "cfs+fuzzy+smote(k=5)");
        assert_eq!(Pipeline::NONE.to_string(), "none");
    }
}
