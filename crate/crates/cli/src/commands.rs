use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ghost_core::baselines::{
    parse_pair_key, published_summaries, published_verdict, stored_ghost_vs_dodge, stored_ghost_vs_wang, BaselineSource,
    BaselineTable, DODGE_METRICS,
};
use ghost_core::dataset::synth::write_surrogate_corpus;
use ghost_core::dataset::{build_split, DataRef, DefectDataset, Registry};
use ghost_core::demo::{boundary_fixture, decision_grids, BoundaryParams};
use ghost_core::dodge::{DodgeParams, Epsilon};
use ghost_core::ghost::{ablation_run, cross_project_run, ghost_run, scalability_probe, AblationRow, GhostParams, RunResult};
use ghost_core::metrics::Metric;
use ghost_core::nn::{NetConfig, DEFAULT_LEARNING_RATE};
use ghost_core::sampling::FuzzyParams;
use ghost_core::stats::{
    comparison_csv, comparison_markdown, point_compare, quantile, summary_csv, summary_markdown, wtl_summary, ComparisonRow,
    PointStatsParams, WtlSummary,
};

use crate::error::CliError;
use crate::output::{cell, scatter_svg, write_atomic, Record, Table};

#[derive(Debug, Parser)]
#[command(name = "ghost", version, about = "Defect prediction experiments: fuzzy oversampling, weighted loss, tabu tuning")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Directory holding `project-version.csv` files.
    #[arg(long, global = true, default_value = "data/promise")]
    pub data_dir: PathBuf,
    /// Directory for result files.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for concurrent repeats.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: ghost_core::GhostError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct Tuning {
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// f1, recall, auc, popt20 or pf.
    #[arg(long, value_parser = parse_metric, default_value = "f1")]
    pub goal: Metric,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta_r: f64,
    /// Absolute tie radius for tuning; defaults to 0.2 of the phase-1 range.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub n1: usize,
    #[arg(long, default_value_t = 30)]
    pub n2: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    /// Start with two fuzzy passes.
    #[arg(long)]
    pub two_sample: bool,
}

impl Tuning {
    fn params(&self, seed: u64) -> Result<GhostParams, CliError> {
        let p = GhostParams {
            tau: self.tau,
            two_sample: self.two_sample,
            fuzzy: FuzzyParams {
                delta_r: self.delta_r,
                ..FuzzyParams::default()
            },
            dodge: DodgeParams {
                n1: self.n1,
                n2: self.n2,
                epsilon: self.epsilon.map_or(Epsilon::RangeFraction(0.2), Epsilon::Absolute),
                goal: self.goal,
                ..DodgeParams::default()
            },
            net: NetConfig {
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                ..NetConfig::default()
            },
            repeats: self.repeats,
            seed,
            ..GhostParams::default()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Against {
    Dodge,
    Wang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Context {
    Wpdp,
    Cpdp,
}

impl Context {
    fn source(self) -> BaselineSource {
        match self {
            Context::Wpdp => BaselineSource::WangWpdpTable6,
            Context::Cpdp => BaselineSource::WangCpdpTable7,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Context::Wpdp => "wpdp",
            Context::Cpdp => "cpdp",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run GHOST on one within-project split or one release pair.
    Run {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, conflicts_with_all = ["source", "target"])]
        project: Option<String>,
        /// Training release, e.g. log4j-1.1.
        #[arg(long, requires = "target")]
        source: Option<String>,
        /// Test release, e.g. jedit-4.1.
        #[arg(long, requires = "source")]
        target: Option<String>,
    },
    /// Median and IQR of F1 per ablation row, pooled over projects and repeats.
    Ablation {
        #[command(flatten)]
        tuning: Tuning,
        /// Row ids 1-8.
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<u8>>,
        #[arg(long, value_delimiter = ',')]
        projects: Option<Vec<String>>,
        /// Also write a scatter of test-set defect share against F1.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Win/tie/loss against the bundled DODGE or Wang et al. numbers.
    Compare {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum)]
        against: Against,
        /// Which Wang table; both when omitted.
        #[arg(long, value_enum)]
        context: Option<Context>,
        /// Use only the published points, with no fresh runs.
        #[arg(long)]
        stored: bool,
        /// Restrict to these dataset or pair keys.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
    /// Training time on growing stratified subsamples.
    Scalability {
        #[arg(long, default_value = "xalan")]
        project: String,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
    },
    /// Decision grids of a 2x2 network on a two-input toy problem.
    DemoBoundary {
        /// Share of the minority class.
        #[arg(long, default_value_t = ghost_core::demo::DEFAULT_MINORITY)]
        imbalance: f64,
        #[arg(long, default_value_t = 300)]
        points: usize,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
    },
    /// Write the synthetic stand-in corpus into --data-dir.
    SynthData,
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.global.jobs {
        if j < 1 {
            return Err(CliError::usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Run {
            tuning,
            project,
            source,
            target,
        } => cmd_run(g, tuning, project.as_deref(), source.as_deref(), target.as_deref()),
        Command::Ablation {
            tuning,
            rows,
            projects,
            svg,
        } => cmd_ablation(g, tuning, rows.as_deref(), projects.as_deref(), svg.as_deref()),
        Command::Compare {
            tuning,
            against,
            context,
            stored,
            only,
        } => cmd_compare(g, tuning, *against, *context, *stored, only.as_deref()),
        Command::Scalability {
            project,
            fractions,
            repeats,
            epochs,
        } => cmd_scalability(g, project, fractions, *repeats, *epochs),
        Command::DemoBoundary {
            imbalance,
            points,
            resolution,
        } => cmd_demo(g, *imbalance, *points, *resolution),
        Command::SynthData => {
            let files = write_surrogate_corpus(&g.data_dir, g.seed)?;
            println!("wrote {} releases to {}", files.len(), g.data_dir.display());
            Ok(())
        }
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn pct(v: Option<f64>) -> String {
    cell(v.map(|v| v * 100.0), 1)
}

fn summary_table(r: &RunResult) -> Table {
    let mut t = Table::new(&["metric", "median"]);
    for m in Metric::ALL {
        t.push(vec![m.name().to_string(), pct(r.median.get(m))]);
    }
    t
}

fn render(t: &Table, f: Format) -> String {
    match f {
        Format::Csv => t.csv(),
        Format::Md => t.markdown(),
    }
}

/// Loads a release pair and runs the within-project pipeline when both come
/// from one project, the cross-project one otherwise.
fn pair_run(data_dir: &Path, source: &DataRef, target: &DataRef, params: &GhostParams) -> Result<RunResult, CliError> {
    if source == target {
        return Err(CliError::usage(format!("source and target are both {source}")));
    }
    let train = source.load(data_dir)?;
    let test = target.load(data_dir)?;
    Ok(if source.project == target.project {
        ghost_run(&train, &test, params)?
    } else {
        cross_project_run(&train, &test, params)?
    })
}

fn project_split(data_dir: &Path, project: &str) -> Result<(DefectDataset, DefectDataset), CliError> {
    let reg = Registry::standard();
    Ok(build_split(reg.get(project)?, data_dir)?)
}

fn cmd_run(
    g: &Global,
    tuning: &Tuning,
    project: Option<&str>,
    source: Option<&str>,
    target: Option<&str>,
) -> Result<(), CliError> {
    let params = tuning.params(g.seed)?;
    let (name, result) = match (project, source, target) {
        (Some(p), _, _) => {
            let (train, test) = project_split(&g.data_dir, p)?;
            (p.to_string(), ghost_run(&train, &test, &params)?)
        }
        (None, Some(s), Some(t)) => {
            let (s, t) = (DataRef::parse(s)?, DataRef::parse(t)?);
            (format!("{s}_to_{t}"), pair_run(&g.data_dir, &s, &t, &params)?)
        }
        _ => return Err(CliError::usage("give --project or both --source and --target")),
    };
    let stem = format!("run_{}_{}", slug(&name), params.goal());
    Record::new("run", &g.data_dir, &params, &result).write(&g.out.join(format!("{stem}.json")))?;
    let table = summary_table(&result);
    write_atomic(&g.out.join(format!("{stem}_summary.{}", g.format.ext())), &render(&table, g.format))?;
    println!(
        "{}: theta* {} | twoSample {} | {:.1}s",
        result.label, result.theta_star, result.two_sample_used, result.total_seconds
    );
    print!("{}", render(&table, g.format));
    Ok(())
}

#[derive(Debug, Serialize)]
struct AblationCell {
    project: String,
    row: u8,
    test_buggy_pct: f64,
    result: RunResult,
}

fn cmd_ablation(
    g: &Global,
    tuning: &Tuning,
    rows: Option<&[u8]>,
    projects: Option<&[String]>,
    svg: Option<&Path>,
) -> Result<(), CliError> {
    let params = tuning.params(g.seed)?;
    let rows: Vec<AblationRow> = match rows {
        Some(ids) if ids.is_empty() => return Err(CliError::usage("--rows is empty")),
        Some(ids) => ids
            .iter()
            .map(|&i| AblationRow::new(i).map_err(|e| CliError::usage(e.to_string())))
            .collect::<Result<_, _>>()?,
        None => AblationRow::ALL.to_vec(),
    };
    let projects: Vec<String> = projects.map_or_else(|| Registry::standard().projects(), <[String]>::to_vec);
    if projects.is_empty() {
        return Err(CliError::usage("--projects is empty"));
    }
    let mut cells = Vec::new();
    for p in &projects {
        let (train, test) = project_split(&g.data_dir, p)?;
        for &row in &rows {
            let result = ablation_run(&train, &test, row, &params)?;
            log::info!("{p} row #{}: median f1 {}", row.id(), pct(result.median.f1));
            cells.push(AblationCell {
                project: p.clone(),
                row: row.id(),
                test_buggy_pct: test.buggy_pct(),
                result,
            });
        }
    }

    let mut per_project = Table::new(&["project", "row", "median_f1", "two_sample"]);
    for c in &cells {
        per_project.push(vec![
            c.project.clone(),
            c.row.to_string(),
            pct(c.result.median.f1),
            c.result.two_sample_used.to_string(),
        ]);
    }
    let mut summary = Table::new(&["row", "treatment", "median", "q1", "q3", "iqr"]);
    for &row in &rows {
        let v: Vec<f64> = cells
            .iter()
            .filter(|c| c.row == row.id())
            .flat_map(|c| c.result.metric_values(Metric::F1))
            .map(|f| f * 100.0)
            .collect();
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        summary.push(vec![
            format!("#{}", row.id()),
            row.description().to_string(),
            cell(med, 1),
            cell(q1, 1),
            cell(q3, 1),
            cell(q1.zip(q3).map(|(a, b)| b - a), 1),
        ]);
    }
    let ext = g.format.ext();
    Record::new("ablation", &g.data_dir, &params, &cells).write(&g.out.join("ablation.json"))?;
    write_atomic(&g.out.join(format!("ablation_per_project.{ext}")), &render(&per_project, g.format))?;
    write_atomic(&g.out.join(format!("ablation.{ext}")), &render(&summary, g.format))?;
    if let Some(path) = svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = rows
            .iter()
            .map(|row| {
                let pts = cells
                    .iter()
                    .filter(|c| c.row == row.id())
                    .filter_map(|c| c.result.median.f1.map(|f| (c.test_buggy_pct, f * 100.0)))
                    .collect();
                (format!("row #{}", row.id()), pts)
            })
            .collect();
        let svg_text = scatter_svg("F1 against test-set defect share", "defective modules in test set (%)", "median F1", &series);
        write_atomic(path, &svg_text)?;
    }
    print!("{}", render(&summary, g.format));
    Ok(())
}

fn keep_key(only: Option<&[String]>, key: &str) -> bool {
    let norm = |s: &str| s.replace('→', "->").to_ascii_lowercase();
    only.is_none_or(|o| o.iter().any(|k| norm(k) == norm(key)))
}

fn write_comparison(
    g: &Global,
    stem: &str,
    rows: &[ComparisonRow],
    theirs: &str,
    delta: f64,
    published: Option<(&str, &str)>,
) -> Result<WtlSummary, CliError> {
    let summary = wtl_summary(rows.iter().map(|r| (r.metric.as_str(), r.verdict)));
    let ext = g.format.ext();
    let (detail, totals) = match g.format {
        Format::Csv => (comparison_csv(rows, "ghost", theirs), summary_csv(&summary)),
        Format::Md => (comparison_markdown(rows, "ghost", theirs), summary_markdown(&summary)),
    };
    write_atomic(&g.out.join(format!("{stem}.{ext}")), &detail)?;
    write_atomic(&g.out.join(format!("{stem}_summary.{ext}")), &totals)?;
    println!("{stem}: delta {delta:.4}");
    print!("{totals}");
    if let Some((comparison, column)) = published {
        if let Some(p) = published_summaries()?.get(&(comparison.to_string(), column.to_string())) {
            println!("published {column}: {}/{}/{}", p.win, p.tie, p.loss);
        }
    }
    Ok(summary)
}

fn cmd_compare(
    g: &Global,
    tuning: &Tuning,
    against: Against,
    context: Option<Context>,
    stored: bool,
    only: Option<&[String]>,
) -> Result<(), CliError> {
    match against {
        Against::Dodge => {
            let (params, rows) = if stored {
                stored_ghost_vs_dodge()?
            } else {
                fresh_vs_dodge(g, tuning, only)?
            };
            let rows: Vec<ComparisonRow> = rows.into_iter().filter(|r| keep_key(only, &r.key)).collect();
            if rows.is_empty() {
                return Err(CliError::usage("no datasets selected"));
            }
            let stem = if stored { "compare_dodge_stored" } else { "compare_dodge" };
            write_comparison(g, stem, &rows, "dodge", params.delta, Some(("ghost_vs_dodge", "total")))?;
        }
        Against::Wang => {
            let contexts = context.map_or_else(|| vec![Context::Wpdp, Context::Cpdp], |c| vec![c]);
            let mut any = false;
            for ctx in contexts {
                let (params, rows) = if stored {
                    stored_ghost_vs_wang(ctx.source())?
                } else {
                    fresh_vs_wang(g, tuning, ctx, only)?
                };
                let rows: Vec<ComparisonRow> = rows.into_iter().filter(|r| keep_key(only, &r.key)).collect();
                if rows.is_empty() {
                    continue;
                }
                any = true;
                let stem = format!("compare_wang_{}{}", ctx.name(), if stored { "_stored" } else { "" });
                write_comparison(g, &stem, &rows, "wang", params.delta, Some(("ghost_vs_wang", ctx.name())))?;
                if stored {
                    write_verdict_check(g, &stem, ctx, &rows)?;
                }
            }
            if !any {
                return Err(CliError::usage("no release pairs selected"));
            }
        }
    }
    Ok(())
}

/// Our verdict per pair next to the one implied by the published bold marks.
fn write_verdict_check(g: &Global, stem: &str, ctx: Context, rows: &[ComparisonRow]) -> Result<(), CliError> {
    let table = BaselineTable::load(ctx.source())?;
    let mut t = Table::new(&["pair", "ghost", "wang", "verdict", "published", "agrees"]);
    let mut agree = 0;
    for r in rows {
        let ours = table.row(&r.key, "ghost")?.best.unwrap_or(false);
        let theirs = table.row(&r.key, "wang")?.best.unwrap_or(false);
        let p = published_verdict(ours, theirs);
        agree += usize::from(p == r.verdict);
        t.push(vec![
            r.key.clone(),
            format!("{:.1}", r.ours),
            format!("{:.1}", r.theirs),
            r.verdict.as_str().into(),
            p.as_str().into(),
            (p == r.verdict).to_string(),
        ]);
    }
    write_atomic(&g.out.join(format!("{stem}_verdicts.{}", g.format.ext())), &render(&t, g.format))?;
    println!("{stem}: {agree}/{} verdicts match the published marks", rows.len());
    Ok(())
}

fn fresh_vs_dodge(g: &Global, tuning: &Tuning, only: Option<&[String]>) -> Result<(PointStatsParams, Vec<ComparisonRow>), CliError> {
    let table = BaselineTable::load(BaselineSource::DodgeTable5)?;
    let mut found = Vec::new();
    for key in table.keys().into_iter().filter(|k| keep_key(only, k)) {
        let (train, test) = project_split(&g.data_dir, &key)?;
        for (m, maximize) in DODGE_METRICS {
            let goal: Metric = m.parse()?;
            let params = GhostParams {
                dodge: DodgeParams {
                    goal,
                    ..tuning.params(g.seed)?.dodge
                },
                ..tuning.params(g.seed)?
            };
            let r = ghost_run(&train, &test, &params)?;
            let ours = r.median.get(goal).ok_or_else(|| CliError::runtime(format!("{key}: {goal} undefined")))?;
            found.push((key.clone(), m, maximize, ours, table.value(&key, "DODGE", m)?));
        }
    }
    let pooled: Vec<f64> = found.iter().flat_map(|f| [f.3, f.4]).collect();
    if pooled.is_empty() {
        return Err(CliError::usage("no datasets selected"));
    }
    let params = PointStatsParams::from_values(&pooled)?;
    let rows = found
        .into_iter()
        .map(|(key, m, maximize, ours, theirs)| ComparisonRow {
            key,
            metric: m.to_string(),
            ours,
            theirs,
            verdict: point_compare(ours, theirs, &params, maximize),
        })
        .collect();
    Ok((params, rows))
}

fn fresh_vs_wang(
    g: &Global,
    tuning: &Tuning,
    ctx: Context,
    only: Option<&[String]>,
) -> Result<(PointStatsParams, Vec<ComparisonRow>), CliError> {
    let (params, _) = stored_ghost_vs_wang(ctx.source())?;
    let table = BaselineTable::load(ctx.source())?;
    let run_params = tuning.params(g.seed)?;
    let mut rows = Vec::new();
    for key in table.keys().into_iter().filter(|k| keep_key(only, k)) {
        let (s, t) = parse_pair_key(&key)?;
        let r = pair_run(&g.data_dir, &s, &t, &run_params)?;
        let ours = r.median.f1.map(|f| f * 100.0).ok_or_else(|| CliError::runtime(format!("{key}: f1 undefined")))?;
        let theirs = table.value(&key, "wang", "f1")?;
        rows.push(ComparisonRow {
            key,
            metric: "f1".into(),
            ours,
            theirs,
            verdict: point_compare(ours, theirs, &params, true),
        });
    }
    Ok((params, rows))
}

fn cmd_scalability(g: &Global, project: &str, fractions: &[f64], repeats: usize, epochs: usize) -> Result<(), CliError> {
    if fractions.is_empty() {
        return Err(CliError::usage("--fractions is empty"));
    }
    let (train, _) = project_split(&g.data_dir, project)?;
    let net = NetConfig {
        epochs,
        ..NetConfig::default()
    };
    let rows = scalability_probe(&train, fractions, &net, repeats, g.seed)?;
    let smallest = rows
        .iter()
        .min_by(|a, b| a.fraction.total_cmp(&b.fraction))
        .map(|r| r.median_seconds)
        .unwrap_or(f64::NAN);
    let mut t = Table::new(&["fraction", "rows", "median_seconds", "ratio_to_smallest"]);
    for r in &rows {
        t.push(vec![
            format!("{:.2}", r.fraction),
            r.rows.to_string(),
            format!("{:.6}", r.median_seconds),
            format!("{:.3}", r.median_seconds / smallest),
        ]);
    }
    write_atomic(&g.out.join(format!("scalability_{}.{}", slug(project), g.format.ext())), &render(&t, g.format))?;
    print!("{}", render(&t, g.format));
    Ok(())
}

fn cmd_demo(g: &Global, imbalance: f64, points: usize, resolution: usize) -> Result<(), CliError> {
    let p = BoundaryParams {
        rows: points,
        minority_fraction: imbalance,
        resolution,
        seed: g.seed,
        ..BoundaryParams::default()
    };
    let fixture = boundary_fixture(&p)?;
    for grid in decision_grids(&fixture, &p)? {
        let path = g.out.join(format!("boundary_{}.csv", grid.treatment.name()));
        write_atomic(&path, &grid.to_csv(&fixture))?;
        println!("{}: predicts both classes: {}", grid.treatment.name(), grid.predicts_both());
    }
    Ok(())
}
