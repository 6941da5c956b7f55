use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use iertc::experience::{load_library, save_library};
use iertc::scenegen::{
    generate_scene, ProblemSet, SceneTemplate, TemplateKind, DEFAULT_VERIFY_SECONDS,
};
use iertc::{Budget, Clock, PathLibrary, Query, Scene};
use iertc_bench::metrics::SummaryTable;
use iertc_bench::report::{emit_outputs, load_records};
use iertc_bench::suite::{
    build_dataset, run_planner, run_suite, BenchmarkSpec, PlannerKind,
};
use iertc_bench::summarize;

#[derive(Parser)]
#[command(name = "iertc-bench", version, about = "Scenes, datasets and benchmarks for the iertc planner")]
struct Cli {
    /// Worker threads for parallel generation and suites (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene generation
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
    /// Verified problem sets and experience libraries
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Solve a single query and print the result as JSON
    Plan(PlanArgs),
    /// Planner suites and their reports
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Write the scene of a template and seed as JSON
    Gen {
        #[arg(long)]
        template: TemplateKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate `n` verified problems and the library of their solutions
    Build {
        #[arg(long)]
        template: TemplateKind,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        verify: VerifyArgs,
        /// Output directory for problems.jsonl and library.jsonl
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// RRT-Connect verification budget per query attempt, in seconds
    #[arg(long, default_value_t = DEFAULT_VERIFY_SECONDS)]
    verify: f64,
}

#[derive(Args)]
struct BudgetArgs {
    /// Planning budget per run, in seconds
    #[arg(long, default_value_t = 3.0)]
    budget: f64,
    /// Measure budgets in wall-clock time instead of deterministic work time
    #[arg(long)]
    wall: bool,
}

impl BudgetArgs {
    fn clock(&self) -> Clock {
        if self.wall {
            Clock::Wall
        } else {
            Clock::default()
        }
    }

    fn budget(&self) -> Budget {
        Budget::seconds(self.budget).with_clock(self.clock())
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Problem file; the query at --index is solved
    #[arg(long, conflicts_with_all = ["scene", "start", "goal"])]
    problems: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Scene file, used with --start and --goal
    #[arg(long, requires_all = ["start", "goal"])]
    scene: Option<PathBuf>,
    /// Comma separated start configuration
    #[arg(long)]
    start: Option<String>,
    /// Comma separated goal configuration
    #[arg(long)]
    goal: Option<String>,
    #[arg(long, default_value = "iertc_all")]
    planner: PlannerKind,
    /// Experience library (required by the iertc planners)
    #[arg(long)]
    library: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Generate test and training problems and run the planners on them
    Run(RunArgs),
    /// Recompute the summary and plots from the records in a directory
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Comma separated templates
    #[arg(long, default_value = "gap_wall,cage2d")]
    template: String,
    /// Test problems per template
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Training problems per template, whose solutions form the library
    #[arg(long, default_value_t = 100)]
    train: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    verify: VerifyArgs,
    /// Comma separated planners
    #[arg(long, default_value = "iertc_all,iertc_1,rrt_star,rrt_connect")]
    planners: String,
    /// Use this problem file as the test set instead of generating one
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Use this library instead of generating training problems
    #[arg(long)]
    library: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn parse_config(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("bad coordinate '{x}'"))
        })
        .collect()
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn scene_gen(template: TemplateKind, seed: u64, out: Option<&Path>) -> Result<()> {
    let scene = generate_scene(&SceneTemplate::new(template), seed)?;
    let text = serde_json::to_string_pretty(&scene)?;
    write_or_print(out, &text)
}

fn dataset_build(template: TemplateKind, n: usize, seed: u64, verify: f64, out: &Path) -> Result<()> {
    let verify = Budget::seconds(verify);
    verify.validate()?;
    let (set, lib) = build_dataset(&SceneTemplate::new(template), n, seed, verify)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    set.save(&out.join("problems.jsonl"))?;
    save_library(&lib, &out.join("library.jsonl"))?;
    eprintln!(
        "{} verified {template} problems written to {}",
        set.len(),
        out.display()
    );
    Ok(())
}

fn plan_cmd(args: &PlanArgs) -> Result<()> {
    let (scene, query) = match (&args.problems, &args.scene) {
        (Some(path), _) => {
            let set = ProblemSet::load(path)?;
            let Some(p) = set.problems.get(args.index) else {
                bail!("{} has no problem {}", path.display(), args.index);
            };
            (p.scene.clone(), p.query.clone())
        }
        (None, Some(path)) => {
            let scene = Scene::load(path)?;
            let start = parse_config(args.start.as_deref().unwrap_or_default())?;
            let goal = parse_config(args.goal.as_deref().unwrap_or_default())?;
            (scene, Query::new(start, goal))
        }
        (None, None) => bail!("give either --problems or --scene with --start and --goal"),
    };
    let library = match &args.library {
        Some(path) => load_library(path)?,
        None if args.planner.uses_library() => bail!("{} needs --library", args.planner),
        None => PathLibrary::new(),
    };
    let budget = args.budget.budget();
    budget.validate()?;
    let (result, _) = run_planner(&scene, &query, args.planner, &library, budget, args.seed)?;
    let text = serde_json::to_string_pretty(&result)?;
    write_or_print(args.out.as_deref(), &text)
}

fn print_summary(table: &SummaryTable) {
    println!(
        "{:<14} {:<12} {:>5} {:>7} {:>10} {:>13} {:>11}",
        "scope", "planner", "runs", "solved", "success", "reduction %", "median ttfs"
    );
    let opt = |v: Option<f64>, digits: usize| {
        v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
    };
    for r in &table.rows {
        println!(
            "{:<14} {:<12} {:>5} {:>7} {:>9.1}% {:>13} {:>11}{}",
            r.scope,
            r.planner.name(),
            r.runs,
            r.solved,
            100.0 * r.success_rate,
            opt(r.mean_reduction, 1),
            opt(r.median_first_solution, 4),
            if r.excluded_from_costs { "  (<50%)" } else { "" }
        );
    }
}

fn bench_run(args: &RunArgs) -> Result<()> {
    let templates = args
        .template
        .split(',')
        .map(|t| t.trim().parse::<TemplateKind>())
        .collect::<iertc::Result<Vec<_>>>()?;
    let spec = BenchmarkSpec {
        templates,
        problems: args.n,
        training: args.train,
        planners: PlannerKind::parse_list(&args.planners)?,
        budget: args.budget.budget(),
        verify: Budget::seconds(args.verify.verify),
        seed: args.seed,
    };
    spec.validate()?;
    if (args.problems.is_some() || args.library.is_some()) && spec.templates.len() != 1 {
        bail!("--problems and --library need exactly one --template");
    }

    let mut records = Vec::new();
    for &kind in &spec.templates {
        let template = SceneTemplate::new(kind);
        let test = match &args.problems {
            Some(path) => ProblemSet::load(path)?,
            None => build_dataset(&template, spec.problems, spec.test_seed(kind), spec.verify)?.0,
        };
        let library = match &args.library {
            Some(path) => load_library(path)?,
            None if spec.planners.iter().any(|p| p.uses_library()) => {
                build_dataset(&template, spec.training, spec.training_seed(kind), spec.verify)?.1
            }
            None => PathLibrary::new(),
        };
        if test.is_empty() {
            bail!("the {kind} test set is empty");
        }
        eprintln!(
            "{kind}: {} test problems, {} experiences, {} planners",
            test.len(),
            library.len(),
            spec.planners.len()
        );
        records.extend(run_suite(
            &test,
            &spec.planners,
            &library,
            spec.budget,
            spec.suite_seed(kind),
        )?);
    }

    let table = summarize(&records)?;
    emit_outputs(&table, &records, &args.out)?;
    print_summary(&table);
    Ok(())
}

fn bench_report(out: &Path) -> Result<()> {
    let records = load_records(out)?;
    let table = summarize(&records)?;
    emit_outputs(&table, &records, out)?;
    print_summary(&table);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Scene {
            command: SceneCommand::Gen {
                template,
                seed,
                out,
            },
        } => scene_gen(template, seed, out.as_deref()),
        Command::Dataset {
            command:
                DatasetCommand::Build {
                    template,
                    n,
                    seed,
                    verify,
                    out,
                },
        } => dataset_build(template, n, seed, verify.verify, &out),
        Command::Plan(args) => plan_cmd(&args),
        Command::Bench {
            command: BenchCommand::Run(args),
        } => bench_run(&args),
        Command::Bench {
            command: BenchCommand::Report { out },
        } => bench_report(&out),
    }
}
