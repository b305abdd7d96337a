//! Benchmark families: generate a grid of instances, solve each with every
//! requested method, score against the exact optimum when it fits in the
//! enumeration budget, and tabulate.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dars::DualParams;
use crate::error::{Error, Result};
use crate::fuses::Initialization;
use crate::generate::{generate_grid_instance, GridSpec};
use crate::io::{evaluate, solve_instance, write_atomic, Method, ResultDocument, RunConfig, DEFAULT_ICM_SWEEPS};
use crate::metrics::mean_std;
use crate::mrf::Labeling;
use crate::tnt::SolverParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Square grids of `side × side` nodes.
    pub sides: Vec<usize>,
    pub label_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Generator template; size, label count and seed are overwritten.
    pub grid: GridSpec,
    /// Overrides the per-method staircase defaults when set.
    pub solver: Option<SolverParams>,
    pub dual: DualParams,
    pub init: Initialization,
    pub icm_max_sweeps: usize,
    pub exact_budget: u64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            sides: vec![4, 6, 8],
            label_counts: vec![3],
            seeds: (0..5).collect(),
            methods: vec![Method::Fuses, Method::Icm, Method::Exact],
            grid: GridSpec::default(),
            solver: None,
            dual: DualParams::default(),
            init: Initialization::default(),
            icm_max_sweeps: DEFAULT_ICM_SWEEPS,
            exact_budget: crate::baselines::DEFAULT_BUDGET,
        }
    }
}

impl FamilySpec {
    pub fn run_config(&self, method: Method, seed: u64) -> RunConfig {
        let mut c = RunConfig::for_method(method);
        if let Some(s) = self.solver {
            c.solver = s;
        }
        c.dual = self.dual;
        c.init = self.init;
        c.icm_max_sweeps = self.icm_max_sweeps;
        c.exact_budget = self.exact_budget;
        c.seed = seed;
        c
    }

    fn validate(&self) -> Result<()> {
        if self.sides.is_empty() || self.label_counts.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            return Err(Error::invalid("benchmark family needs at least one size, label count, seed and method"));
        }
        for m in &self.methods {
            self.run_config(*m, 0).validate()?;
        }
        Ok(())
    }
}

/// One (instance, method) cell. Missing values are left empty in the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub method: Method,
    pub num_nodes: usize,
    pub num_labels: usize,
    pub seed: u64,
    pub f_opt: Option<f64>,
    pub f_rounded: Option<f64>,
    pub f_relaxed: Option<f64>,
    pub certified: Option<bool>,
    pub converged: Option<bool>,
    pub percent_optimal_labels: Option<f64>,
    pub relaxation_gap_pct: Option<f64>,
    pub rounding_gap_pct: Option<f64>,
    pub label_agreement_pct: Option<f64>,
    pub total_seconds: Option<f64>,
    pub error: Option<String>,
}

impl CellRow {
    fn failed(method: Method, num_nodes: usize, num_labels: usize, seed: u64, f_opt: Option<f64>, e: &Error) -> Self {
        CellRow {
            method,
            num_nodes,
            num_labels,
            seed,
            f_opt,
            f_rounded: None,
            f_relaxed: None,
            certified: None,
            converged: None,
            percent_optimal_labels: None,
            relaxation_gap_pct: None,
            rounding_gap_pct: None,
            label_agreement_pct: None,
            total_seconds: None,
            error: Some(format!("{}: {e}", e.kind())),
        }
    }
}

/// Mean and sample standard deviation of a column over the rows that have it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
        let ms = mean_std(&v);
        Stat { count: v.len(), mean: ms.map(|p| p.0), std: ms.map(|p| p.1) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub num_nodes: usize,
    pub num_labels: usize,
    pub runs: usize,
    pub failures: usize,
    pub certified_runs: usize,
    pub percent_optimal_labels: Stat,
    pub relaxation_gap_pct: Stat,
    pub rounding_gap_pct: Stat,
    pub label_agreement_pct: Stat,
    pub total_seconds: Stat,
}

/// One point of a gap-versus-size or gap-versus-labels series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub method: Method,
    /// Number of nodes or number of labels, depending on the series.
    pub x: usize,
    pub relaxation_gap_pct: Stat,
    pub rounding_gap_pct: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<CellRow>,
    pub summary: Vec<SummaryRow>,
    pub gap_vs_nodes: Vec<SeriesPoint>,
    pub gap_vs_labels: Vec<SeriesPoint>,
}

fn score(
    doc: &ResultDocument,
    mrf: &crate::mrf::MrfInstance,
    exact: Option<&ResultDocument>,
    gt: &Labeling,
    seed: u64,
) -> Result<CellRow> {
    let report = evaluate(mrf, doc, exact, Some(gt))?;
    Ok(CellRow {
        method: doc.method,
        num_nodes: doc.num_nodes,
        num_labels: doc.num_labels,
        seed,
        f_opt: exact.map(|e| e.f_rounded),
        f_rounded: Some(doc.f_rounded),
        f_relaxed: doc.f_relaxed,
        certified: doc.certified,
        converged: doc.converged,
        percent_optimal_labels: report.percent_optimal_labels,
        relaxation_gap_pct: report.relaxation_gap_pct,
        rounding_gap_pct: report.rounding_gap_pct,
        label_agreement_pct: report.label_agreement_pct,
        total_seconds: Some(doc.timings.total_seconds),
        error: None,
    })
}

fn run_instance(family: &FamilySpec, side: usize, k: usize, seed: u64) -> Vec<CellRow> {
    let n = side * side;
    let spec = GridSpec { rows: side, cols: side, num_labels: k, seed, ..family.grid.clone() };
    let generated = match generate_grid_instance(&spec) {
        Ok(g) => g,
        Err(e) => return family.methods.iter().map(|&m| CellRow::failed(m, n, k, seed, None, &e)).collect(),
    };
    let mrf = &generated.mrf;
    let exact = solve_instance(mrf, &family.run_config(Method::Exact, seed));
    if let Err(e) = &exact {
        log::info!("no exact reference for N={n} K={k} seed={seed}: {e}");
    }
    let reference = exact.as_ref().ok();
    let f_opt = reference.map(|e| e.f_rounded);
    family
        .methods
        .iter()
        .map(|&m| {
            let scored = match (m, &exact) {
                (Method::Exact, Err(e)) => return CellRow::failed(m, n, k, seed, None, e),
                (Method::Exact, Ok(e)) => score(e, mrf, reference, &generated.ground_truth, seed),
                _ => solve_instance(mrf, &family.run_config(m, seed))
                    .and_then(|d| score(&d, mrf, reference, &generated.ground_truth, seed)),
            };
            scored.unwrap_or_else(|e| CellRow::failed(m, n, k, seed, f_opt, &e))
        })
        .collect()
}

fn summarize(cells: &[CellRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize, usize), Vec<&CellRow>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.method, c.num_nodes, c.num_labels)).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((method, num_nodes, num_labels), rows)| {
            let ok: Vec<&CellRow> = rows.iter().copied().filter(|r| r.error.is_none()).collect();
            SummaryRow {
                method,
                num_nodes,
                num_labels,
                runs: rows.len(),
                failures: rows.len() - ok.len(),
                certified_runs: ok.iter().filter(|r| r.certified == Some(true)).count(),
                percent_optimal_labels: Stat::of(ok.iter().filter_map(|r| r.percent_optimal_labels)),
                relaxation_gap_pct: Stat::of(ok.iter().filter_map(|r| r.relaxation_gap_pct)),
                rounding_gap_pct: Stat::of(ok.iter().filter_map(|r| r.rounding_gap_pct)),
                label_agreement_pct: Stat::of(ok.iter().filter_map(|r| r.label_agreement_pct)),
                total_seconds: Stat::of(ok.iter().filter_map(|r| r.total_seconds)),
            }
        })
        .collect()
}

fn series(cells: &[CellRow], key: impl Fn(&CellRow) -> usize) -> Vec<SeriesPoint> {
    let mut groups: BTreeMap<(Method, usize), Vec<&CellRow>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.error.is_none()) {
        groups.entry((c.method, key(c))).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((method, x), rows)| SeriesPoint {
            method,
            x,
            relaxation_gap_pct: Stat::of(rows.iter().filter_map(|r| r.relaxation_gap_pct)),
            rounding_gap_pct: Stat::of(rows.iter().filter_map(|r| r.rounding_gap_pct)),
        })
        .collect()
}

/// Runs the whole family. Instances are solved in parallel; rows come back
/// in (size, labels, seed, method) order regardless of scheduling.
pub fn run_family(family: &FamilySpec) -> Result<BenchReport> {
    family.validate()?;
    let mut jobs = Vec::new();
    for &side in &family.sides {
        for &k in &family.label_counts {
            for &seed in &family.seeds {
                jobs.push((side, k, seed));
            }
        }
    }
    let cells: Vec<CellRow> =
        jobs.par_iter().flat_map_iter(|&(side, k, seed)| run_instance(family, side, k, seed)).collect();
    Ok(BenchReport {
        summary: summarize(&cells),
        gap_vs_nodes: series(&cells, |c| c.num_nodes),
        gap_vs_labels: series(&cells, |c| c.num_labels),
        cells,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stat_fields(s: &Stat) -> [String; 2] {
    [opt(s.mean), opt(s.std)]
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))
}

const STAT_COLUMNS: [&str; 5] =
    ["percent_optimal_labels", "relaxation_gap_pct", "rounding_gap_pct", "label_agreement_pct", "total_seconds"];

pub fn summary_csv(report: &BenchReport) -> Result<Vec<u8>> {
    let mut header = vec!["method", "num_nodes", "num_labels", "runs", "failures", "certified_runs"];
    let names: Vec<String> = STAT_COLUMNS.iter().flat_map(|c| [format!("{c}_mean"), format!("{c}_std")]).collect();
    header.extend(names.iter().map(String::as_str));
    csv_bytes(
        &header,
        report.summary.iter().map(|s| {
            let mut r = vec![
                s.method.to_string(),
                s.num_nodes.to_string(),
                s.num_labels.to_string(),
                s.runs.to_string(),
                s.failures.to_string(),
                s.certified_runs.to_string(),
            ];
            for st in [
                &s.percent_optimal_labels,
                &s.relaxation_gap_pct,
                &s.rounding_gap_pct,
                &s.label_agreement_pct,
                &s.total_seconds,
            ] {
                r.extend(stat_fields(st));
            }
            r
        }),
    )
}

pub fn cells_csv(report: &BenchReport) -> Result<Vec<u8>> {
    let header = [
        "method",
        "num_nodes",
        "num_labels",
        "seed",
        "f_opt",
        "f_rounded",
        "f_relaxed",
        "certified",
        "converged",
        "percent_optimal_labels",
        "relaxation_gap_pct",
        "rounding_gap_pct",
        "label_agreement_pct",
        "total_seconds",
        "error",
    ];
    csv_bytes(
        &header,
        report.cells.iter().map(|c| {
            vec![
                c.method.to_string(),
                c.num_nodes.to_string(),
                c.num_labels.to_string(),
                c.seed.to_string(),
                opt(c.f_opt),
                opt(c.f_rounded),
                opt(c.f_relaxed),
                opt(c.certified),
                opt(c.converged),
                opt(c.percent_optimal_labels),
                opt(c.relaxation_gap_pct),
                opt(c.rounding_gap_pct),
                opt(c.label_agreement_pct),
                opt(c.total_seconds),
                c.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn series_csv(points: &[SeriesPoint], x_name: &str) -> Result<Vec<u8>> {
    let header = [
        "method",
        x_name,
        "runs",
        "relaxation_gap_pct_mean",
        "relaxation_gap_pct_std",
        "rounding_gap_pct_mean",
        "rounding_gap_pct_std",
    ];
    csv_bytes(
        &header,
        points.iter().map(|p| {
            let mut r = vec![p.method.to_string(), p.x.to_string(), p.rounding_gap_pct.count.to_string()];
            r.extend(stat_fields(&p.relaxation_gap_pct));
            r.extend(stat_fields(&p.rounding_gap_pct));
            r
        }),
    )
}

/// File names written by [`write_report`].
pub const REPORT_FILES: [&str; 4] = ["summary.csv", "cells.csv", "gap_vs_nodes.csv", "gap_vs_labels.csv"];

pub fn write_report(dir: &Path, report: &BenchReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join(REPORT_FILES[0]), &summary_csv(report)?)?;
    write_atomic(&dir.join(REPORT_FILES[1]), &cells_csv(report)?)?;
    write_atomic(&dir.join(REPORT_FILES[2]), &series_csv(&report.gap_vs_nodes, "num_nodes")?)?;
    write_atomic(&dir.join(REPORT_FILES[3]), &series_csv(&report.gap_vs_labels, "num_labels")?)?;
    Ok(())
}
