//! CSV tables and SVG plots of benchmark results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use iertc::planner::ConvergenceTrace;
use iertc::scenegen::TemplateKind;
use iertc::PlanStatus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{relative_cost_reduction, SummaryRow, SummaryTable};
use crate::plot::{bar_chart, line_chart};
use crate::suite::{BenchRecord, PlannerKind};

pub const RECORDS_CSV: &str = "records.csv";
pub const TRACES_CSV: &str = "traces.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUCCESS_SVG: &str = "success_rate.svg";
pub const REDUCTION_SVG: &str = "cost_reduction.svg";

/// Number of time samples of a plotted convergence curve.
const CURVE_SAMPLES: usize = 60;

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    template: String,
    problem_id: String,
    planner: String,
    status: String,
    final_cost: Option<f64>,
    criterion_cost_rrt_connect: f64,
    reduction_pct: Option<f64>,
    time_to_first_solution: Option<f64>,
    iterations: u64,
    elapsed: f64,
    seed: u64,
    experiences: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    template: String,
    problem_id: String,
    planner: String,
    time: f64,
    best_cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryCsvRow {
    scope: String,
    planner: String,
    runs: usize,
    solved: usize,
    success_rate: f64,
    mean_reduction_vs_rrt_connect_pct: Option<f64>,
    median_time_to_first_solution: Option<f64>,
    excluded_from_costs: bool,
}

fn status_name(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Solved => "solved",
        PlanStatus::TimedOut => "timed_out",
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    // headers are written explicitly so that empty tables still carry them
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

const RECORD_HEADER: [&str; 12] = [
    "template",
    "problem_id",
    "planner",
    "status",
    "final_cost",
    "criterion_cost_rrt_connect",
    "reduction_pct",
    "time_to_first_solution",
    "iterations",
    "elapsed",
    "seed",
    "experiences",
];
const TRACE_HEADER: [&str; 5] = ["template", "problem_id", "planner", "time", "best_cost"];
const SUMMARY_HEADER: [&str; 8] = [
    "scope",
    "planner",
    "runs",
    "solved",
    "success_rate",
    "mean_reduction_vs_rrt_connect_pct",
    "median_time_to_first_solution",
    "excluded_from_costs",
];

/// Mean best cost, relative to the criterion cost, of the solved runs of
/// one planner on one template. The curve starts once every solved run has
/// a solution, so each point averages the same runs and the curve never
/// rises.
pub fn convergence_curve(records: &[&BenchRecord]) -> Vec<(f64, f64)> {
    let solved: Vec<&&BenchRecord> = records
        .iter()
        .filter(|r| r.is_solved() && r.criterion_cost > 0.0)
        .collect();
    if solved.is_empty() {
        return Vec::new();
    }
    let first = solved
        .iter()
        .filter_map(|r| r.time_to_first_solution)
        .fold(0.0, f64::max);
    let last = solved.iter().map(|r| r.elapsed).fold(first, f64::max);
    let steps = if last > first { CURVE_SAMPLES - 1 } else { 0 };
    (0..=steps)
        .map(|k| {
            let t = if steps == 0 {
                first
            } else {
                first + (last - first) * k as f64 / steps as f64
            };
            let sum: f64 = solved
                .iter()
                .map(|r| r.trace.cost_at(t).unwrap_or(f64::NAN) / r.criterion_cost)
                .sum();
            (t, sum / solved.len() as f64)
        })
        .collect()
}

/// Name of the convergence plot of `template` inside an output directory.
pub fn convergence_svg(template: TemplateKind) -> String {
    format!("convergence_{template}.svg")
}

/// Writes the record, trace and summary tables and, when there are records,
/// the plots. Returns the written paths.
pub fn emit_outputs(
    table: &SummaryTable,
    records: &[BenchRecord],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let rows = records
        .iter()
        .map(|r| {
            let reduction = match r.final_cost {
                Some(c) if r.is_solved() => Some(relative_cost_reduction(c, r.criterion_cost)?),
                _ => None,
            };
            Ok(RecordRow {
                template: r.template.to_string(),
                problem_id: r.problem_id.clone(),
                planner: r.planner.to_string(),
                status: status_name(r.status).into(),
                final_cost: r.final_cost,
                criterion_cost_rrt_connect: r.criterion_cost,
                reduction_pct: reduction,
                time_to_first_solution: r.time_to_first_solution,
                iterations: r.iterations,
                elapsed: r.elapsed,
                seed: r.seed,
                experiences: r.experiences,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out_dir.join(RECORDS_CSV);
    write_csv(&path, &RECORD_HEADER, &rows)?;
    written.push(path);

    let traces: Vec<TraceRow> = records
        .iter()
        .flat_map(|r| {
            r.trace.samples.iter().map(|&(time, best_cost)| TraceRow {
                template: r.template.to_string(),
                problem_id: r.problem_id.clone(),
                planner: r.planner.to_string(),
                time,
                best_cost,
            })
        })
        .collect();
    let path = out_dir.join(TRACES_CSV);
    write_csv(&path, &TRACE_HEADER, &traces)?;
    written.push(path);

    let summary: Vec<SummaryCsvRow> = table
        .rows
        .iter()
        .map(|r| SummaryCsvRow {
            scope: r.scope.clone(),
            planner: r.planner.to_string(),
            runs: r.runs,
            solved: r.solved,
            success_rate: r.success_rate,
            mean_reduction_vs_rrt_connect_pct: r.mean_reduction,
            median_time_to_first_solution: r.median_first_solution,
            excluded_from_costs: r.excluded_from_costs,
        })
        .collect();
    let path = out_dir.join(SUMMARY_CSV);
    write_csv(&path, &SUMMARY_HEADER, &summary)?;
    written.push(path);

    if records.is_empty() {
        return Ok(written);
    }

    let scopes = table.scopes();
    let planners = table.planners();
    let column = |f: &dyn Fn(&SummaryRow) -> Option<f64>| -> Vec<(String, Vec<Option<f64>>)> {
        planners
            .iter()
            .map(|&p| {
                let vals = scopes
                    .iter()
                    .map(|s| table.get(s, p).and_then(f))
                    .collect();
                (p.to_string(), vals)
            })
            .collect()
    };
    let success = bar_chart(
        "Success rate",
        "success rate (%)",
        &scopes,
        &column(&|r| Some(100.0 * r.success_rate)),
    );
    let reduction = bar_chart(
        "Mean cost reduction vs RRT-Connect (planners with >= 50% success)",
        "cost reduction (%)",
        &scopes,
        &column(&|r| {
            if r.excluded_from_costs {
                None
            } else {
                r.mean_reduction
            }
        }),
    );
    for (name, svg) in [(SUCCESS_SVG, success), (REDUCTION_SVG, reduction)] {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(io_err(&path))?;
        written.push(path);
    }

    let mut groups: BTreeMap<TemplateKind, BTreeMap<PlannerKind, Vec<&BenchRecord>>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry(r.template)
            .or_default()
            .entry(r.planner)
            .or_default()
            .push(r);
    }
    for (template, by_planner) in groups {
        let series: Vec<(String, Vec<(f64, f64)>)> = by_planner
            .iter()
            .map(|(p, rs)| (p.to_string(), convergence_curve(rs)))
            .filter(|s| !s.1.is_empty())
            .collect();
        let svg = line_chart(
            &format!("{template}: mean best cost of solved runs"),
            "time (s)",
            "cost / RRT-Connect cost",
            &series,
        );
        let path = out_dir.join(convergence_svg(template));
        fs::write(&path, svg).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn malformed(path: &Path, row: usize, reason: impl ToString) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        row,
        reason: reason.to_string(),
    }
}

/// Reads back the records written by [`emit_outputs`], traces included.
pub fn load_records(out_dir: &Path) -> Result<Vec<BenchRecord>> {
    let path = out_dir.join(RECORDS_CSV);
    let rows: Vec<RecordRow> = read_csv(&path)?;
    let mut records = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let status = match row.status.as_str() {
                "solved" => PlanStatus::Solved,
                "timed_out" => PlanStatus::TimedOut,
                other => return Err(malformed(&path, i, format!("unknown status '{other}'"))),
            };
            Ok(BenchRecord {
                template: row.template.parse().map_err(|e| malformed(&path, i, e))?,
                problem_id: row.problem_id,
                planner: row.planner.parse().map_err(|e| malformed(&path, i, e))?,
                status,
                final_cost: row.final_cost,
                criterion_cost: row.criterion_cost_rrt_connect,
                time_to_first_solution: row.time_to_first_solution,
                iterations: row.iterations,
                elapsed: row.elapsed,
                seed: row.seed,
                experiences: row.experiences,
                trace: ConvergenceTrace::default(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let trace_path = out_dir.join(TRACES_CSV);
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        index.insert(
            (r.template.to_string(), r.problem_id.clone(), r.planner.to_string()),
            i,
        );
    }
    for (i, row) in read_csv::<TraceRow>(&trace_path)?.into_iter().enumerate() {
        let key = (row.template, row.problem_id, row.planner);
        let Some(&k) = index.get(&key) else {
            return Err(malformed(&trace_path, i, "trace of an unknown record"));
        };
        records[k].trace.push(row.time, row.best_cost);
    }
    Ok(records)
}

/// Reads a summary table written by [`emit_outputs`].
pub fn load_summary(out_dir: &Path) -> Result<SummaryTable> {
    let path = out_dir.join(SUMMARY_CSV);
    let rows = read_csv::<SummaryCsvRow>(&path)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(SummaryRow {
                scope: r.scope,
                planner: r.planner.parse().map_err(|e| malformed(&path, i, e))?,
                runs: r.runs,
                solved: r.solved,
                success_rate: r.success_rate,
                mean_reduction: r.mean_reduction_vs_rrt_connect_pct,
                median_first_solution: r.median_time_to_first_solution,
                excluded_from_costs: r.excluded_from_costs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryTable { rows })
}

/// Series plotted in a convergence SVG, read from the `data-values`
/// attributes.
pub fn parse_svg_series(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let attr = |tag: &str, name: &str| -> Option<String> {
        let key = format!(" {name}=\"");
        let start = tag.find(&key)? + key.len();
        let end = tag[start..].find('"')? + start;
        Some(tag[start..end].to_string())
    };
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let name = attr(l, "data-series")?;
            let values = attr(l, "data-values")?
                .split_whitespace()
                .filter_map(|pair| {
                    let (x, y) = pair.split_once(',')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect();
            Some((name, values))
        })
        .collect()
}
