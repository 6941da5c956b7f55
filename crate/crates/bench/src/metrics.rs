//! Success rates, cost reductions and first-solution times.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::suite::{BenchRecord, PlannerKind};

/// Scope label of rows aggregated over every template.
pub const ALL_TEMPLATES: &str = "all";

/// Success rate below which a planner's costs are left out of comparisons.
pub const COST_TABLE_MIN_SUCCESS: f64 = 0.5;

/// `100 (1 - final / criterion)`, in percent. Negative when the final path
/// is longer than the criterion path.
pub fn relative_cost_reduction(final_cost: f64, criterion_cost: f64) -> Result<f64> {
    if !(criterion_cost > 0.0) {
        return Err(Error::NonPositiveCriterion(criterion_cost));
    }
    Ok(100.0 * (1.0 - final_cost / criterion_cost))
}

/// Median of `values`; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// Template name, or [`ALL_TEMPLATES`].
    pub scope: String,
    pub planner: PlannerKind,
    pub runs: usize,
    pub solved: usize,
    pub success_rate: f64,
    /// Mean relative cost reduction over solved runs, in percent.
    pub mean_reduction: Option<f64>,
    /// Median time to first solution over solved runs, in seconds.
    pub median_first_solution: Option<f64>,
    /// Success rate below [`COST_TABLE_MIN_SUCCESS`].
    pub excluded_from_costs: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, scope: &str, planner: PlannerKind) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.scope == scope && r.planner == planner)
    }

    pub fn scopes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scope) {
                out.push(r.scope.clone());
            }
        }
        out
    }

    pub fn planners(&self) -> Vec<PlannerKind> {
        let mut out: Vec<PlannerKind> = self.rows.iter().map(|r| r.planner).collect();
        out.sort();
        out.dedup();
        out
    }
}

fn summary_row(scope: String, planner: PlannerKind, records: &[&BenchRecord]) -> Result<SummaryRow> {
    let solved: Vec<&&BenchRecord> = records.iter().filter(|r| r.is_solved()).collect();
    let reductions = solved
        .iter()
        .map(|r| relative_cost_reduction(r.final_cost.unwrap_or(0.0), r.criterion_cost))
        .collect::<Result<Vec<f64>>>()?;
    let times: Vec<f64> = solved
        .iter()
        .filter_map(|r| r.time_to_first_solution)
        .collect();
    let success_rate = if records.is_empty() {
        0.0
    } else {
        solved.len() as f64 / records.len() as f64
    };
    Ok(SummaryRow {
        scope,
        planner,
        runs: records.len(),
        solved: solved.len(),
        success_rate,
        mean_reduction: (!reductions.is_empty())
            .then(|| reductions.iter().sum::<f64>() / reductions.len() as f64),
        median_first_solution: median(&times),
        excluded_from_costs: success_rate < COST_TABLE_MIN_SUCCESS,
    })
}

/// Aggregates records per (template, planner). When records span several
/// templates, rows over all of them follow under [`ALL_TEMPLATES`]. Cost
/// and time statistics use solved runs only.
pub fn summarize(records: &[BenchRecord]) -> Result<SummaryTable> {
    let mut groups: BTreeMap<_, Vec<&BenchRecord>> = BTreeMap::new();
    let mut overall: BTreeMap<PlannerKind, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.template, r.planner)).or_default().push(r);
        overall.entry(r.planner).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((template, planner), group) in &groups {
        rows.push(summary_row(template.to_string(), *planner, group)?);
    }
    let templates: std::collections::BTreeSet<_> = groups.keys().map(|k| k.0).collect();
    if templates.len() > 1 {
        for (planner, group) in &overall {
            rows.push(summary_row(ALL_TEMPLATES.into(), *planner, group)?);
        }
    }
    Ok(SummaryTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use iertc::planner::ConvergenceTrace;
    use iertc::scenegen::TemplateKind;
    use iertc::PlanStatus;

    fn record(planner: PlannerKind, cost: Option<f64>, ttfs: f64) -> BenchRecord {
        let mut trace = ConvergenceTrace::default();
        if let Some(c) = cost {
            trace.push(ttfs, c);
        }
        BenchRecord {
            template: TemplateKind::Cage2D,
            problem_id: "p".into(),
            planner,
            status: if cost.is_some() {
                PlanStatus::Solved
            } else {
                PlanStatus::TimedOut
            },
            final_cost: cost,
            criterion_cost: 10.0,
            time_to_first_solution: cost.map(|_| ttfs),
            iterations: 1,
            elapsed: 3.0,
            seed: 0,
            experiences: 0,
            trace,
        }
    }

    #[test]
    fn reduction_examples() {
        let r = relative_cost_reduction(4.53, 10.0).unwrap();
        assert!((r - 54.7).abs() < 1e-9);
        assert_eq!(relative_cost_reduction(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(relative_cost_reduction(0.0, 3.0).unwrap(), 100.0);
        assert!(relative_cost_reduction(12.0, 10.0).unwrap() < 0.0);
        assert!(relative_cost_reduction(1.0, 0.0).is_err());
        assert!(relative_cost_reduction(1.0, -2.0).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn half_solved_is_half() {
        let records: Vec<_> = (0..10)
            .map(|i| record(PlannerKind::RrtStar, (i % 2 == 0).then_some(8.0), 1.0))
            .collect();
        let t = summarize(&records).unwrap();
        let row = t.get("cage2d", PlannerKind::RrtStar).unwrap();
        assert_eq!(row.success_rate, 0.5);
        assert!(!row.excluded_from_costs);
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn all_timed_out_has_no_costs() {
        let records = vec![record(PlannerKind::RrtStar, None, 0.0); 3];
        let row = summarize(&records).unwrap().rows[0].clone();
        assert_eq!(row.success_rate, 0.0);
        assert_eq!(row.mean_reduction, None);
        assert_eq!(row.median_first_solution, None);
        assert!(row.excluded_from_costs);
    }

    #[test]
    fn mixed_records_average_solved_only() {
        let records = vec![
            record(PlannerKind::IertcAll, Some(5.0), 0.2),
            record(PlannerKind::IertcAll, None, 0.0),
            record(PlannerKind::IertcAll, Some(8.0), 0.6),
            record(PlannerKind::IertcAll, Some(11.0), 0.4),
        ];
        let row = summarize(&records).unwrap().rows[0].clone();
        // reductions 50, 20, -10
        assert!((row.mean_reduction.unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(row.median_first_solution, Some(0.4));
        assert_eq!(row.solved, 3);
        assert_eq!(row.success_rate, 0.75);
    }

    #[test]
    fn all_scope_spans_templates() {
        let mut records = vec![record(PlannerKind::RrtStar, Some(5.0), 1.0)];
        let mut other = record(PlannerKind::RrtStar, None, 0.0);
        other.template = TemplateKind::GapWall;
        records.push(other);
        let t = summarize(&records).unwrap();
        assert_eq!(t.scopes(), vec!["gap_wall", "cage2d", "all"]);
        assert_eq!(t.get("all", PlannerKind::RrtStar).unwrap().success_rate, 0.5);
    }
}
