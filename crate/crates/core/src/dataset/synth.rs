//! Seeded surrogate corpus in PROMISE format.
//!
//! The public PROMISE CSVs are not redistributed here. This generator writes
//! stand-in files with the same release names, row counts and defect counts,
//! so every experiment can run end to end without the original data. Metric
//! values come from a latent-factor model: a size factor, a coupling factor
//! and an inheritance factor drive the 20 attributes, and defect propensity
//! is a noisy linear function of size and coupling. Within each release the
//! rows with the highest propensity are the defective ones, which reproduces
//! the large train/test prevalence shifts of the real releases.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataRef, PROMISE_ATTRIBUTES};
use crate::error::{GhostError, Result};

/// `(project, version, rows, defective rows)` for every release used by the
/// within-project, version-pair and cross-project experiments.
pub const SURROGATE_RELEASES: [(&str, &str, usize, usize); 38] = [
    ("ant", "1.5", 293, 32),
    ("ant", "1.6", 351, 92),
    ("ant", "1.7", 745, 166),
    ("camel", "1.0", 339, 13),
    ("camel", "1.2", 608, 216),
    ("camel", "1.4", 872, 145),
    ("camel", "1.6", 965, 188),
    ("ivy", "1.1", 111, 63),
    ("ivy", "1.4", 241, 16),
    ("ivy", "2.0", 352, 40),
    ("jedit", "3.2", 272, 90),
    ("jedit", "4.0", 306, 75),
    ("jedit", "4.1", 312, 79),
    ("jedit", "4.2", 367, 48),
    ("jedit", "4.3", 492, 11),
    ("log4j", "1.0", 135, 34),
    ("log4j", "1.1", 109, 37),
    ("log4j", "1.2", 205, 189),
    ("lucene", "2.0", 195, 91),
    ("lucene", "2.2", 247, 144),
    ("lucene", "2.4", 340, 203),
    ("poi", "1.5", 237, 141),
    ("poi", "2.0", 314, 37),
    ("poi", "2.5", 385, 248),
    ("poi", "3.0", 442, 281),
    ("synapse", "1.0", 157, 16),
    ("synapse", "1.1", 222, 60),
    ("synapse", "1.2", 256, 86),
    ("velocity", "1.4", 196, 147),
    ("velocity", "1.5", 214, 142),
    ("velocity", "1.6", 229, 78),
    ("xalan", "2.4", 723, 110),
    ("xalan", "2.5", 803, 387),
    ("xalan", "2.6", 885, 411),
    ("xalan", "2.7", 909, 898),
    ("xerces", "1.2", 440, 71),
    ("xerces", "1.3", 453, 69),
    ("xerces", "1.4", 588, 437),
];

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Per-project coefficients of the latent model.
struct ProjectModel {
    size_weight: f64,
    coupling_weight: f64,
    noise: f64,
    size_mean: f64,
}

impl ProjectModel {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            size_weight: rng.random_range(0.6..1.0),
            coupling_weight: rng.random_range(0.3..0.7),
            noise: rng.random_range(0.7..0.9),
            size_mean: rng.random_range(-0.3..0.3),
        }
    }
}

fn release_csv(project: &str, version: &str, rows: usize, buggy: usize, model: &ProjectModel, drift: f64, rng: &mut ChaCha8Rng) -> String {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let g = |rng: &mut ChaCha8Rng| -> f64 { std.sample(rng) };

    struct Row {
        values: [f64; 20],
        propensity: f64,
    }
    let mut table: Vec<Row> = (0..rows)
        .map(|_| {
            let z = model.size_mean + drift + g(rng);
            let c = g(rng);
            let h = g(rng);
            let wmc = (1.9 + 0.8 * z + 0.3 * g(rng)).exp().round().max(0.0);
            let dit = (1.0 + 1.5 * h.abs() + 0.3 * g(rng)).round().clamp(1.0, 7.0);
            let noc = ((0.8 * h - 1.5 + 0.5 * g(rng)).exp() - 0.3).round().max(0.0);
            let cbo = (1.8 + 0.5 * z + 0.6 * c + 0.3 * g(rng)).exp().round();
            let rfc = (2.0 * wmc + (2.5 + 0.6 * z + 0.3 * c + 0.3 * g(rng)).exp()).round();
            let lcom = (wmc * (wmc - 1.0) / 2.0 * rng.random_range(0.0..0.9)).round().max(0.0);
            let lcom3 = (0.9 + 0.3 * g(rng) - 0.1 * z).clamp(0.0, 2.0);
            let npm = (wmc * rng.random_range(0.4..1.0)).round();
            let loc = (4.6 + 1.0 * z + 0.3 * g(rng)).exp().round();
            let dam = (0.6 + 0.35 * g(rng)).clamp(0.0, 1.0);
            let moa = ((0.2 * z + 0.4 * c - 0.8 + 0.6 * g(rng)).exp() - 0.5).round().max(0.0);
            let mfa = if dit > 1.0 { rng.random_range(0.2..1.0) } else { 0.0 };
            let cam = (0.5 - 0.12 * z + 0.1 * g(rng)).clamp(0.05, 1.0);
            let ic = ((dit - 1.0) * rng.random_range(0.0..0.7)).round();
            let cbm = (ic * rng.random_range(0.0..2.0)).round();
            let amc = loc / wmc.max(1.0) * rng.random_range(0.7..1.0);
            let ca = ((0.8 + 0.7 * c + 0.5 * g(rng)).exp() - 1.0).round().max(0.0);
            let ce = ((1.2 + 0.4 * z + 0.6 * c + 0.3 * g(rng)).exp() - 1.0).round().max(0.0);
            let max_cc = (0.9 + 0.6 * z + 0.4 * g(rng)).exp().round().max(1.0);
            let avg_cc = max_cc * rng.random_range(0.3..0.9);
            let propensity =
                model.size_weight * z + model.coupling_weight * c + model.noise * g(rng);
            Row {
                values: [
                    wmc, dit, noc, cbo, rfc, lcom, lcom3, npm, loc, dam, moa, mfa, cam, ic, cbm,
                    amc, ca, ce, max_cc, avg_cc,
                ],
                propensity,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| table[b].propensity.total_cmp(&table[a].propensity));
    let mut bugs = vec![0u32; rows];
    for &i in order.iter().take(buggy) {
        let extra: f64 = rng.random();
        bugs[i] = 1 + (extra * extra * 4.0) as u32;
    }

    let mut out = String::from("name,version,name");
    for a in PROMISE_ATTRIBUTES {
        out.push(',');
        out.push_str(a);
    }
    out.push_str(",bug\n");
    for (i, row) in table.iter_mut().enumerate() {
        let _ = write!(out, "{project},{version},org.{project}.C{i:04}");
        for v in row.values {
            let _ = write!(out, ",{}", (v * 1e4).round() / 1e4);
        }
        let _ = writeln!(out, ",{}", bugs[i]);
    }
    out
}

/// Generates the surrogate text for one release.
pub fn surrogate_release(seed: u64, project: &str, version: &str) -> Result<String> {
    let project = project.to_ascii_lowercase();
    let releases: Vec<_> = {
        let mut r: Vec<_> = SURROGATE_RELEASES
            .iter()
            .filter(|(p, ..)| *p == project)
            .collect();
        r.sort_by(|a, b| super::registry::compare_versions(a.1, b.1));
        r
    };
    let idx = releases
        .iter()
        .position(|(_, v, ..)| *v == version)
        .ok_or_else(|| GhostError::UnknownKey {
            source_name: "surrogate releases".into(),
            key: format!("{project}-{version}"),
            available: SURROGATE_RELEASES
                .iter()
                .map(|(p, v, ..)| format!("{p}-{v}"))
                .collect::<Vec<_>>()
                .join(", "),
        })?;
    let mut model_rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&project));
    let model = ProjectModel::draw(&mut model_rng);
    let (_, _, rows, buggy) = *releases[idx];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&format!("{project}-{version}")));
    let drift = 0.05 * idx as f64;
    Ok(release_csv(&project, version, rows, buggy, &model, drift, &mut rng))
}

/// Writes every surrogate release into `dir`, returning the written paths.
pub fn write_surrogate_corpus(dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| GhostError::io(dir, e))?;
    let mut written = Vec::new();
    for (project, version, ..) in SURROGATE_RELEASES {
        let text = surrogate_release(seed, project, version)?;
        let path = dir.join(DataRef::new(project, version).file_name());
        fs::write(&path, text).map_err(|e| GhostError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_promise_csv, Provenance};

    #[test]
    fn counts_match_table() {
        let text = surrogate_release(7, "ivy", "2.0").unwrap();
        let ds = parse_promise_csv(&text, Provenance::new("ivy", vec!["2.0".into()])).unwrap();
        assert_eq!(ds.len(), 352);
        assert_eq!(ds.count_label(1), 40);
        assert!((ds.buggy_pct() - 11.0).abs() < 1.0);
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            surrogate_release(3, "xalan", "2.4").unwrap(),
            surrogate_release(3, "xalan", "2.4").unwrap()
        );
        assert_ne!(
            surrogate_release(3, "xalan", "2.4").unwrap(),
            surrogate_release(4, "xalan", "2.4").unwrap()
        );
    }

    #[test]
    fn unknown_release() {
        assert!(surrogate_release(0, "nosuch", "1.0").is_err());
    }
}
