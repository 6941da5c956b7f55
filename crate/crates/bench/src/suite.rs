//! Planner suites over problem sets.

use std::fmt;
use std::str::FromStr;

use iertc::baselines::{rrt_connect, rrt_star, BaselineConfig};
use iertc::planner::ConvergenceTrace;
use iertc::scenegen::{
    assemble_dataset, dataset_seed, derive_seed, generate_problem, ProblemSet,
    SceneTemplate, TemplateKind,
};
use iertc::{plan, Budget, PathLibrary, PlanResult, PlanStatus, PlannerConfig, Query, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlannerKind {
    /// IERTC* retrieving from the whole library.
    #[serde(rename = "iertc_all")]
    IertcAll,
    /// IERTC* given one library entry drawn at random per problem.
    #[serde(rename = "iertc_1")]
    IertcSingle,
    #[serde(rename = "rrt_star")]
    RrtStar,
    #[serde(rename = "rrt_connect")]
    RrtConnect,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::IertcAll,
        PlannerKind::IertcSingle,
        PlannerKind::RrtStar,
        PlannerKind::RrtConnect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::IertcAll => "iertc_all",
            PlannerKind::IertcSingle => "iertc_1",
            PlannerKind::RrtStar => "rrt_star",
            PlannerKind::RrtConnect => "rrt_connect",
        }
    }

    pub fn uses_library(self) -> bool {
        matches!(self, PlannerKind::IertcAll | PlannerKind::IertcSingle)
    }

    /// Parses a comma separated list such as `iertc_all,rrt_star`.
    pub fn parse_list(s: &str) -> Result<Vec<PlannerKind>> {
        let list = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::Config("no planners given".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = PlannerKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown planner '{s}' (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Outcome of one planner on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub template: TemplateKind,
    pub problem_id: String,
    pub planner: PlannerKind,
    pub status: PlanStatus,
    pub final_cost: Option<f64>,
    /// Cost of the RRT-Connect solution that verified the problem.
    pub criterion_cost: f64,
    pub time_to_first_solution: Option<f64>,
    pub iterations: u64,
    pub elapsed: f64,
    pub seed: u64,
    /// Experiences available to the planner.
    pub experiences: usize,
    pub trace: ConvergenceTrace,
}

impl BenchRecord {
    pub fn is_solved(&self) -> bool {
        self.status == PlanStatus::Solved
    }
}

/// Seed of the run of `planner` on problem `index`.
pub fn record_seed(suite_seed: u64, index: usize, planner: PlannerKind) -> u64 {
    derive_seed(derive_seed(suite_seed, index as u64), planner as u64)
}

/// Runs `planner` once. Returns the result and the number of experiences
/// the planner was given.
pub fn run_planner(
    scene: &Scene,
    query: &Query,
    planner: PlannerKind,
    library: &PathLibrary,
    budget: Budget,
    seed: u64,
) -> Result<(PlanResult, usize)> {
    let iertc = |lib: &PathLibrary| {
        let cfg = PlannerConfig {
            budget,
            seed,
            ..PlannerConfig::default()
        };
        plan(query, scene, lib, &cfg)
    };
    let baseline = BaselineConfig {
        budget,
        seed,
        ..BaselineConfig::default()
    };
    Ok(match planner {
        PlannerKind::IertcAll => (iertc(library)?, library.len()),
        PlannerKind::IertcSingle => {
            if library.is_empty() {
                return Err(Error::Config("library is empty".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
            let pick = rng.gen_range(0..library.len());
            let single = library.single(pick).expect("index in range");
            (iertc(&single)?, 1)
        }
        PlannerKind::RrtStar => (rrt_star(query, scene, &baseline)?, 0),
        PlannerKind::RrtConnect => (rrt_connect(query, scene, &baseline)?, 0),
    })
}

/// Runs every planner on every problem. Each run gets its own seed derived
/// from `seed`, the problem index and the planner, so the records do not
/// depend on scheduling. Runs execute on the current rayon pool.
pub fn run_suite(
    problems: &ProblemSet,
    planners: &[PlannerKind],
    library: &PathLibrary,
    budget: Budget,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    budget.validate()?;
    if planners.iter().any(|p| p.uses_library()) && library.is_empty() {
        return Err(Error::Config(
            "experience planners need a non-empty library".into(),
        ));
    }
    let jobs: Vec<(usize, PlannerKind)> = (0..problems.len())
        .flat_map(|i| planners.iter().map(move |p| (i, *p)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, planner)| {
            let problem = &problems.problems[i];
            let seed = record_seed(seed, i, planner);
            let (result, experiences) =
                run_planner(&problem.scene, &problem.query, planner, library, budget, seed)?;
            Ok(BenchRecord {
                template: problem.template,
                problem_id: problem.id.clone(),
                planner,
                status: result.status,
                final_cost: result.cost(),
                criterion_cost: problem.criterion_cost,
                time_to_first_solution: result.time_to_first_solution,
                iterations: result.iterations,
                elapsed: result.elapsed,
                seed,
                experiences,
                trace: result.trace,
            })
        })
        .collect()
}

/// Generates a verified dataset with problems built in parallel. The result
/// equals [`iertc::scenegen::build_dataset`] for the same arguments.
pub fn build_dataset(
    template: &SceneTemplate,
    n: usize,
    seed: u64,
    verify: Budget,
) -> Result<(ProblemSet, PathLibrary)> {
    if n == 0 {
        return Err(Error::Config("dataset needs at least one problem".into()));
    }
    let problems = (0..n)
        .into_par_iter()
        .map(|i| generate_problem(template, dataset_seed(seed, i), verify))
        .collect::<iertc::Result<Vec<_>>>()?;
    Ok(assemble_dataset(problems)?)
}

/// A full benchmark: per template, a test set and a separately seeded
/// training set whose solutions form the library.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub templates: Vec<TemplateKind>,
    /// Test problems per template.
    pub problems: usize,
    /// Training problems per template.
    pub training: usize,
    pub planners: Vec<PlannerKind>,
    pub budget: Budget,
    pub verify: Budget,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn test_seed(&self, kind: TemplateKind) -> u64 {
        derive_seed(self.seed, 3 * kind as u64)
    }

    pub fn training_seed(&self, kind: TemplateKind) -> u64 {
        derive_seed(self.seed, 3 * kind as u64 + 1)
    }

    pub fn suite_seed(&self, kind: TemplateKind) -> u64 {
        derive_seed(self.seed, 3 * kind as u64 + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() || self.planners.is_empty() {
            return Err(Error::Config(
                "need at least one template and one planner".into(),
            ));
        }
        if self.problems == 0 || self.training == 0 {
            return Err(Error::Config(
                "problem and training counts must be positive".into(),
            ));
        }
        self.budget.validate()?;
        self.verify.validate()?;
        Ok(())
    }
}

/// Problems generated for one template of a benchmark.
#[derive(Clone, Debug)]
pub struct TemplateData {
    pub kind: TemplateKind,
    pub test: ProblemSet,
    pub training: ProblemSet,
    pub library: PathLibrary,
}

pub fn generate_template_data(spec: &BenchmarkSpec, kind: TemplateKind) -> Result<TemplateData> {
    let template = SceneTemplate::new(kind);
    let (test, _) = build_dataset(&template, spec.problems, spec.test_seed(kind), spec.verify)?;
    let (training, library) =
        build_dataset(&template, spec.training, spec.training_seed(kind), spec.verify)?;
    Ok(TemplateData {
        kind,
        test,
        training,
        library,
    })
}

/// Generates the data for every template and runs the suite on it.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    for &kind in &spec.templates {
        let data = generate_template_data(spec, kind)?;
        records.extend(run_suite(
            &data.test,
            &spec.planners,
            &data.library,
            spec.budget,
            spec.suite_seed(kind),
        )?);
    }
    Ok(records)
}
