//! Benchmark harness for the iertc planner: planner suites over generated
//! problem sets, the success and cost metrics, and CSV/SVG reports.

pub mod error;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod suite;

pub use error::{Error, Result};
pub use metrics::{relative_cost_reduction, summarize, SummaryRow, SummaryTable};
pub use report::{emit_outputs, load_records, load_summary};
pub use suite::{
    build_dataset, run_benchmark, run_planner, run_suite, BenchRecord, BenchmarkSpec, PlannerKind,
};
