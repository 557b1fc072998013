//! Sweep runner. A cell is one (strategy, vocabulary size, protocol,
//! repetition) combination, plus a threshold for filtered cells. Cells run on
//! a bounded worker pool, are persisted one by one under `cells/` and are
//! assembled into the summary tables in canonical order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use semvoc::encoding::{encode_dataset, BoFVector};
use semvoc::eval::{
    aggregate_over_nc, class_of_images, cluster_classifier_fit, cluster_classifier_predict, compute_metrics,
    linear_ovr_fit, linear_ovr_predict, make_split, roc_points, MetricsReport, Protocol,
};
use semvoc::filtering::FilterParams;
use semvoc::vocabulary::{build, Strategy};
use semvoc::Dataset;

use crate::config::ExperimentConfig;

pub const RESULTS_HEADER: [&str; 10] = [
    "strategy",
    "vocab_size",
    "protocol",
    "repetition",
    "nc",
    "macro_precision",
    "macro_recall",
    "macro_f",
    "macro_tpr",
    "macro_fpr",
];

pub const CLASS_HEADER: [&str; 12] = [
    "strategy",
    "vocab_size",
    "protocol",
    "repetition",
    "nc",
    "class",
    "support",
    "precision",
    "recall",
    "f_measure",
    "tpr",
    "fpr",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub strategy: Strategy,
    pub vocab_size: usize,
    pub protocol: Protocol,
    pub repetition: usize,
    /// Threshold multiplier; set for filtered cells only.
    pub alpha: Option<f64>,
}

impl Cell {
    pub fn key(&self) -> String {
        let mut k = format!("{}_m{}_{}_r{}", self.strategy, self.vocab_size, self.protocol, self.repetition);
        if let Some(a) = self.alpha {
            k.push_str(&format!("_a{a}"));
        }
        k
    }
}

/// Main sweep cells in canonical order.
pub fn main_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        for &vocab_size in &cfg.vocab_sizes {
            for &protocol in &cfg.protocols {
                for repetition in 0..cfg.eval.construction_repeats {
                    cells.push(Cell {
                        strategy,
                        vocab_size,
                        protocol,
                        repetition,
                        alpha: (strategy == Strategy::FiltModel).then_some(cfg.filter.alpha),
                    });
                }
            }
        }
    }
    cells
}

/// Threshold sweep cells, filtered strategy only.
pub fn alpha_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &alpha in &cfg.alpha_sweep {
        for &vocab_size in &cfg.vocab_sizes {
            for &protocol in &cfg.protocols {
                for repetition in 0..cfg.eval.construction_repeats {
                    cells.push(Cell {
                        strategy: Strategy::FiltModel,
                        vocab_size,
                        protocol,
                        repetition,
                        alpha: Some(alpha),
                    });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub nc: Option<usize>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f: f64,
    pub macro_tpr: f64,
    pub macro_fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub nc: Option<usize>,
    pub class: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub rows: Vec<ResultRow>,
    pub classes: Vec<ClassRow>,
}

impl CellOutput {
    fn push(&mut self, nc: Option<usize>, report: &MetricsReport) {
        self.rows.push(ResultRow {
            nc,
            macro_precision: report.macro_precision,
            macro_recall: report.macro_recall,
            macro_f: report.macro_f,
            macro_tpr: report.macro_tpr,
            macro_fpr: report.macro_fpr,
        });
        for c in &report.classes {
            self.classes.push(ClassRow {
                nc,
                class: c.name.clone(),
                support: c.support,
                precision: c.precision,
                recall: c.recall,
                f_measure: c.f_measure,
                tpr: c.tpr,
                fpr: c.fpr,
            });
        }
    }

    /// Aggregated F-measure for clustering cells (mean over `nc`), plain
    /// macro F otherwise.
    pub fn score(&self) -> f64 {
        aggregate_over_nc(&self.rows.iter().map(|r| r.macro_f).collect::<Vec<_>>()).unwrap_or(0.0)
    }

    fn mean_of(&self, f: impl Fn(&ResultRow) -> f64) -> f64 {
        self.rows.iter().map(f).sum::<f64>() / self.rows.len().max(1) as f64
    }
}

/// Dataset plus the per-image class and labeled-row lookups the cells need.
pub struct Prepared {
    pub dataset: Dataset,
    pub classes: Vec<usize>,
    row_of_image: Vec<usize>,
}

impl Prepared {
    pub fn new(dataset: Dataset) -> semvoc::Result<Self> {
        let classes = class_of_images(&dataset)?;
        let mut row_of_image = vec![usize::MAX; dataset.images().len()];
        for (row, &i) in dataset.labeled_indices().iter().enumerate() {
            row_of_image[i] = row;
        }
        Ok(Prepared {
            dataset,
            classes,
            row_of_image,
        })
    }
}

/// Runs one cell from scratch.
pub fn run_cell(cfg: &ExperimentConfig, data: &Prepared, cell: &Cell) -> semvoc::Result<CellOutput> {
    let labels = data.dataset.label_vocab();
    let split = make_split(&data.classes, labels, &cfg.split_spec(cell.protocol), cell.repetition)?;
    let rows: Vec<usize> = split.labeled.iter().map(|&i| data.row_of_image[i]).collect();
    let vocab_source = data.dataset.restrict_labeled(&rows)?;

    let rep = cell.repetition as u64;
    let kmeans = cfg.kmeans.with_seed(cfg.seed.derive_indexed("construction", rep));
    let filter = FilterParams {
        alpha: cell.alpha.unwrap_or(cfg.filter.alpha),
        seed: cfg.seed.derive_indexed("filter", rep),
        ..cfg.filter
    };
    let vocab = build(cell.strategy, cell.vocab_size, &vocab_source, &kmeans, &filter)?;
    // classification always sees the original, unfiltered features
    let encoded: Vec<BoFVector> = encode_dataset(&data.dataset, &vocab)?;
    evaluate_encoding(cfg, data, &encoded, cell.protocol, cell.repetition)
}

/// Scores one encoding of the whole dataset (dataset order) under one
/// protocol and split repetition.
pub fn evaluate_encoding(
    cfg: &ExperimentConfig,
    data: &Prepared,
    encoded: &[BoFVector],
    protocol: Protocol,
    repetition: usize,
) -> semvoc::Result<CellOutput> {
    let labels = data.dataset.label_vocab();
    let split = make_split(&data.classes, labels, &cfg.split_spec(protocol), repetition)?;
    let rep = repetition as u64;

    let vectors = |idx: &[usize]| idx.iter().map(|&i| encoded[i].weights.as_slice()).collect::<Vec<&[f64]>>();
    let learn = vectors(&split.learn);
    let test = vectors(&split.test);
    let truth: Vec<usize> = split.test.iter().map(|&i| data.classes[i]).collect();

    let mut out = CellOutput {
        rows: Vec::new(),
        classes: Vec::new(),
    };
    match protocol {
        Protocol::HoldoutClustering => {
            let labeled: Vec<(usize, usize)> = split
                .learn
                .iter()
                .enumerate()
                .filter(|(_, i)| split.labeled.binary_search(i).is_ok())
                .map(|(p, &i)| (p, data.classes[i]))
                .collect();
            let classifier_seed = cfg.seed.derive_indexed("cluster-classifier", rep);
            let jobs: Vec<(usize, usize)> = cfg
                .eval
                .nc_values
                .iter()
                .flat_map(|&nc| (0..cfg.eval.clustering_repeats).map(move |r| (nc, r)))
                .collect();
            let reports = jobs
                .par_iter()
                .map(|&(nc, r)| {
                    let seed = classifier_seed.derive_indexed("nc", nc as u64).derive_indexed("repeat", r as u64);
                    let model = cluster_classifier_fit(&learn, &labeled, labels.len(), nc, seed)?;
                    compute_metrics(&truth, &cluster_classifier_predict(&model, &test)?, labels)
                })
                .collect::<semvoc::Result<Vec<_>>>()?;
            for (i, &nc) in cfg.eval.nc_values.iter().enumerate() {
                let n = cfg.eval.clustering_repeats;
                out.push(Some(nc), &MetricsReport::mean_of(&reports[i * n..(i + 1) * n])?);
            }
        }
        Protocol::ClassBalancedSvm => {
            let learn_classes: Vec<usize> = split.learn.iter().map(|&i| data.classes[i]).collect();
            let model = linear_ovr_fit(&learn, &learn_classes, labels.len(), &cfg.linear)?;
            let predicted = linear_ovr_predict(&model, &test)?;
            out.push(None, &compute_metrics(&truth, &predicted, labels)?);
        }
    }
    Ok(out)
}

fn opt_nc(nc: Option<usize>) -> String {
    nc.map(|n| n.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path, comment: &str) -> Result<csv::Writer<fs::File>> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(comment.as_bytes())?;
    Ok(csv::Writer::from_writer(f))
}

fn cell_prefix(cell: &Cell) -> [String; 4] {
    [
        cell.strategy.to_string(),
        cell.vocab_size.to_string(),
        cell.protocol.to_string(),
        cell.repetition.to_string(),
    ]
}

fn result_record(cell: &Cell, r: &ResultRow) -> Vec<String> {
    let mut rec = cell_prefix(cell).to_vec();
    rec.push(opt_nc(r.nc));
    rec.extend([r.macro_precision, r.macro_recall, r.macro_f, r.macro_tpr, r.macro_fpr].map(|v| v.to_string()));
    rec
}

fn class_record(cell: &Cell, c: &ClassRow) -> Vec<String> {
    let mut rec = cell_prefix(cell).to_vec();
    rec.extend([opt_nc(c.nc), c.class.clone(), c.support.to_string()]);
    rec.extend([c.precision, c.recall, c.f_measure, c.tpr, c.fpr].map(|v| v.to_string()));
    rec
}

fn write_atomic(path: &Path, comment: &str, header: &[&str], records: &[Vec<String>]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = csv_writer(&tmp, comment)?;
        w.write_record(header)?;
        for r in records {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cell_paths(cells_dir: &Path, cell: &Cell) -> (PathBuf, PathBuf) {
    let key = cell.key();
    (cells_dir.join(format!("{key}.results.csv")), cells_dir.join(format!("{key}.classes.csv")))
}

fn parse_nc(s: &str) -> Result<Option<usize>> {
    Ok(if s.is_empty() { None } else { Some(s.parse()?) })
}

/// Reads a persisted cell back, if it exists and was written under the same
/// config hash.
fn load_cell(cells_dir: &Path, cell: &Cell, comment: &str) -> Result<Option<CellOutput>> {
    let (results, classes) = cell_paths(cells_dir, cell);
    let stamped = |p: &Path| -> bool {
        fs::read_to_string(p)
            .map(|t| t.lines().next() == Some(comment.trim_end()))
            .unwrap_or(false)
    };
    if !stamped(&results) || !stamped(&classes) {
        return Ok(None);
    }
    let reader = |p: &Path| -> Result<csv::Reader<fs::File>> {
        Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(p)?)
    };
    let mut out = CellOutput {
        rows: Vec::new(),
        classes: Vec::new(),
    };
    let f = |rec: &csv::StringRecord, i: usize| -> Result<f64> { Ok(rec[i].parse()?) };
    for rec in reader(&results)?.records() {
        let rec = rec?;
        out.rows.push(ResultRow {
            nc: parse_nc(&rec[4])?,
            macro_precision: f(&rec, 5)?,
            macro_recall: f(&rec, 6)?,
            macro_f: f(&rec, 7)?,
            macro_tpr: f(&rec, 8)?,
            macro_fpr: f(&rec, 9)?,
        });
    }
    for rec in reader(&classes)?.records() {
        let rec = rec?;
        out.classes.push(ClassRow {
            nc: parse_nc(&rec[4])?,
            class: rec[5].to_string(),
            support: rec[6].parse()?,
            precision: f(&rec, 7)?,
            recall: f(&rec, 8)?,
            f_measure: f(&rec, 9)?,
            tpr: f(&rec, 10)?,
            fpr: f(&rec, 11)?,
        });
    }
    Ok(Some(out))
}

fn store_cell(cells_dir: &Path, cell: &Cell, comment: &str, out: &CellOutput) -> Result<()> {
    let (results, classes) = cell_paths(cells_dir, cell);
    let class_recs: Vec<_> = out.classes.iter().map(|c| class_record(cell, c)).collect();
    write_atomic(&classes, comment, &CLASS_HEADER, &class_recs)?;
    let result_recs: Vec<_> = out.rows.iter().map(|r| result_record(cell, r)).collect();
    write_atomic(&results, comment, &RESULTS_HEADER, &result_recs)
}

#[derive(Debug)]
pub struct Summary {
    pub out_dir: PathBuf,
    pub cells: usize,
    pub resumed: usize,
    pub failures: Vec<(Cell, String)>,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Runs (or resumes) the full sweep and writes every summary table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let cells_dir = cfg.out_dir.join("cells");
    fs::create_dir_all(&cells_dir).with_context(|| format!("creating {}", cells_dir.display()))?;
    let comment = cfg.header_comment();

    let (dataset, _) = crate::data::load(cfg)?;
    let data = Prepared::new(dataset)?;
    log::info!(
        "{} images, {} labels, config hash {}",
        data.dataset.images().len(),
        data.dataset.num_labels(),
        cfg.hash()
    );

    let main = main_cells(cfg);
    let mut all = main.clone();
    for c in alpha_cells(cfg) {
        if !all.iter().any(|m| m.key() == c.key()) {
            all.push(c);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outcomes: Vec<(Result<CellOutput, String>, bool)> = pool.install(|| {
        all.par_iter()
            .map(|cell| {
                if let Ok(Some(done)) = load_cell(&cells_dir, cell, &comment) {
                    return (Ok(done), true);
                }
                let res = run_cell(cfg, &data, cell)
                    .map_err(|e| e.to_string())
                    .and_then(|o| store_cell(&cells_dir, cell, &comment, &o).map(|_| o).map_err(|e| format!("{e:#}")));
                match &res {
                    Ok(o) => log::info!("cell {} done, score {:.4}", cell.key(), o.score()),
                    Err(e) => log::error!("cell {} failed: {e}", cell.key()),
                }
                (res, false)
            })
            .collect()
    });

    let resumed = outcomes.iter().filter(|(_, r)| *r).count();
    let mut failures = Vec::new();
    let mut done: Vec<(Cell, CellOutput)> = Vec::new();
    for (cell, (res, _)) in all.iter().zip(outcomes) {
        match res {
            Ok(o) => done.push((*cell, o)),
            Err(e) => failures.push((*cell, e)),
        }
    }
    write_tables(cfg, &comment, &main, &done, &failures)?;
    Ok(Summary {
        out_dir: cfg.out_dir.clone(),
        cells: all.len(),
        resumed,
        failures,
    })
}

/// Writes `results.csv` and `per_class.csv` for the given cells, in order.
pub fn write_results(out: &Path, comment: &str, done: &[(Cell, CellOutput)]) -> Result<()> {
    let mut results = csv_writer(&out.join("results.csv"), comment)?;
    results.write_record(RESULTS_HEADER)?;
    let mut per_class = csv_writer(&out.join("per_class.csv"), comment)?;
    per_class.write_record(CLASS_HEADER)?;
    for (cell, o) in done {
        for r in &o.rows {
            results.write_record(result_record(cell, r))?;
        }
        for c in &o.classes {
            per_class.write_record(class_record(cell, c))?;
        }
    }
    results.flush()?;
    per_class.flush()?;
    Ok(())
}

fn write_tables(
    cfg: &ExperimentConfig,
    comment: &str,
    main: &[Cell],
    done: &[(Cell, CellOutput)],
    failures: &[(Cell, String)],
) -> Result<()> {
    let out = &cfg.out_dir;
    let is_main = |c: &Cell| main.iter().any(|m| m == c);

    let main_done: Vec<(Cell, CellOutput)> = done.iter().filter(|(c, _)| is_main(c)).cloned().collect();
    write_results(out, comment, &main_done)?;

    let mut f_curve = csv_writer(&out.join("curve_f_vs_size.csv"), comment)?;
    f_curve.write_record(["strategy", "protocol", "vocab_size", "score", "repetitions"])?;
    let mut tpr_curve = csv_writer(&out.join("curve_tpr_vs_size.csv"), comment)?;
    tpr_curve.write_record(["strategy", "protocol", "vocab_size", "macro_tpr"])?;
    let mut roc = csv_writer(&out.join("roc.csv"), comment)?;
    roc.write_record(["strategy", "protocol", "vocab_size", "macro_fpr", "macro_tpr", "smallest"])?;

    let group = |strategy: Strategy, alpha: Option<f64>, protocol: Protocol, m: usize| -> Vec<&CellOutput> {
        done.iter()
            .filter(|(c, _)| c.strategy == strategy && c.alpha == alpha && c.protocol == protocol && c.vocab_size == m)
            .map(|(_, o)| o)
            .collect()
    };
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;

    for &strategy in &cfg.strategies {
        let alpha = (strategy == Strategy::FiltModel).then_some(cfg.filter.alpha);
        for &protocol in &cfg.protocols {
            let mut points = Vec::new();
            for &m in &cfg.vocab_sizes {
                let g = group(strategy, alpha, protocol, m);
                if g.is_empty() {
                    continue;
                }
                let score = mean(&g.iter().map(|o| o.score()).collect::<Vec<_>>());
                let tpr = mean(&g.iter().map(|o| o.mean_of(|r| r.macro_tpr)).collect::<Vec<_>>());
                let fpr = mean(&g.iter().map(|o| o.mean_of(|r| r.macro_fpr)).collect::<Vec<_>>());
                let tag = [strategy.to_string(), protocol.to_string(), m.to_string()];
                f_curve.write_record(tag.iter().cloned().chain([score.to_string(), g.len().to_string()]))?;
                tpr_curve.write_record(tag.iter().cloned().chain([tpr.to_string()]))?;
                points.push((m, macro_only(fpr, tpr)));
            }
            let refs: Vec<(usize, &MetricsReport)> = points.iter().map(|(m, r)| (*m, r)).collect();
            for p in roc_points(&refs) {
                roc.write_record([
                    strategy.to_string(),
                    protocol.to_string(),
                    p.vocab_size.to_string(),
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                    (if p.smallest { "*" } else { "" }).to_string(),
                ])?;
            }
        }
    }
    f_curve.flush()?;
    tpr_curve.flush()?;
    roc.flush()?;

    if !cfg.alpha_sweep.is_empty() {
        let mut sweep = csv_writer(&out.join("alpha_sweep.csv"), comment)?;
        sweep.write_record(["alpha", "protocol", "vocab_size", "score", "repetitions"])?;
        for &alpha in &cfg.alpha_sweep {
            for &protocol in &cfg.protocols {
                for &m in &cfg.vocab_sizes {
                    let g = group(Strategy::FiltModel, Some(alpha), protocol, m);
                    if g.is_empty() {
                        continue;
                    }
                    let score = mean(&g.iter().map(|o| o.score()).collect::<Vec<_>>());
                    sweep.write_record([
                        alpha.to_string(),
                        protocol.to_string(),
                        m.to_string(),
                        score.to_string(),
                        g.len().to_string(),
                    ])?;
                }
            }
        }
        sweep.flush()?;
    }

    let mut fails = csv_writer(&out.join("failures.csv"), comment)?;
    fails.write_record(["strategy", "vocab_size", "protocol", "repetition", "alpha", "error"])?;
    for (cell, e) in failures {
        let mut rec = cell_prefix(cell).to_vec();
        rec.push(cell.alpha.map(|a| a.to_string()).unwrap_or_default());
        rec.push(e.clone());
        fails.write_record(rec)?;
    }
    fails.flush()?;
    Ok(())
}

/// A report carrying only macro rates, for the ROC table.
fn macro_only(fpr: f64, tpr: f64) -> MetricsReport {
    MetricsReport {
        classes: Vec::new(),
        macro_precision: 0.0,
        macro_recall: tpr,
        macro_f: 0.0,
        macro_tpr: tpr,
        macro_fpr: fpr,
        confusion: Vec::new(),
    }
}
