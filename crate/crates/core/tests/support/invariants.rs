//! Seeded invariant sweep over the planner, shared by the integration tests
//! and the acceptance suite.

use std::collections::BTreeMap;

use iertc::clock::{Budget, Clock, Stopwatch};
use iertc::cspace::{euclidean, polyline_length, Scene};
use iertc::experience::{ExperienceMeta, ExperiencePath, LibraryEntry, PathLibrary};
use iertc::planner::{
    extend, heuristic_cost, near, plan_observed, reject_sample, rewire, Checker, Extension,
    MicroSegment, NearRadius, NodeId, Orientation, PlanEvent, PlanResult, PlannerConfig,
    PlannerState, Query, SearchTree,
};
use iertc::scenegen::{derive_seed, generate_scene, SceneTemplate, TemplateKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TREE_CONSISTENCY: &str = "tree cost consistency";
pub const REWIRE_MONOTONICITY: &str = "rewire monotonicity";
pub const SHORTCUT_DOMINANCE: &str = "shortcut dominance";
pub const PRUNE_SAFETY: &str = "prune safety";
pub const REJECTION_SOUNDNESS: &str = "rejection soundness";
pub const ANYTIME_MONOTONICITY: &str = "anytime monotonicity";
pub const SOLUTION_VALIDITY: &str = "solution validity";
pub const DETERMINISM: &str = "determinism";

pub const ALL: [&str; 8] = [
    TREE_CONSISTENCY,
    REWIRE_MONOTONICITY,
    SHORTCUT_DOMINANCE,
    PRUNE_SAFETY,
    REJECTION_SOUNDNESS,
    ANYTIME_MONOTONICITY,
    SOLUTION_VALIDITY,
    DETERMINISM,
];

const TOL: f64 = 1e-9;

/// A seeded problem for one sweep run.
pub struct Case {
    pub label: String,
    pub scene: Scene,
    pub query: Query,
    pub library: PathLibrary,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Point2,
    Point6,
    Arm,
}

impl Family {
    fn template(self) -> SceneTemplate {
        match self {
            Family::Point2 => SceneTemplate::new(TemplateKind::ClutterGrid).with_count(12),
            Family::Point6 => SceneTemplate::new(TemplateKind::OpenBox).with_dim(6),
            Family::Arm => SceneTemplate::new(TemplateKind::ArmShelf),
        }
    }
}

fn random_valid(scene: &Scene, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let q = scene.space().sample_uniform(rng);
        if scene.is_state_valid(&q).unwrap() {
            return q;
        }
    }
}

/// Builds a seeded case: a generated scene, a random valid query and a
/// one-entry library holding a bent path near the query.
pub fn case(family: Family, seed: u64) -> Case {
    let scene = generate_scene(&family.template(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 17));
    let min_sep = 0.3 * scene.space().diagonal();
    let (start, goal) = loop {
        let a = random_valid(&scene, &mut rng);
        let b = random_valid(&scene, &mut rng);
        if euclidean(&a, &b) >= min_sep {
            break (a, b);
        }
    };
    let jitter = 0.05 * scene.space().diagonal();
    let mut wobble = |q: &[f64]| -> Vec<f64> {
        q.iter().map(|x| x + rng.gen_range(-jitter..=jitter)).collect()
    };
    let bend = scene.space().sample_uniform(&mut ChaCha8Rng::seed_from_u64(seed));
    let path = vec![wobble(&start), bend, wobble(&goal)];
    let library = PathLibrary::from_entries(vec![LibraryEntry {
        path: ExperiencePath::from_waypoints(path).unwrap(),
        meta: ExperienceMeta::default(),
    }])
    .unwrap();
    Case {
        label: format!("{family:?}-{seed}"),
        scene,
        query: Query::new(start, goal),
        library,
        seed,
    }
}

/// Per-invariant number of checked runs and collected violations.
#[derive(Debug, Default)]
pub struct Report {
    pub runs: BTreeMap<&'static str, usize>,
    pub violations: BTreeMap<&'static str, Vec<String>>,
    pub solved: usize,
    pub prunes: usize,
    pub rejections: usize,
}

impl Report {
    fn ran(&mut self, name: &'static str) {
        *self.runs.entry(name).or_default() += 1;
    }

    fn fail(&mut self, name: &'static str, msg: String) {
        let v = self.violations.entry(name).or_default();
        if v.len() < 10 {
            v.push(msg);
        }
    }

    pub fn passed(&self, name: &str) -> bool {
        self.violations.get(name).map_or(true, Vec::is_empty)
    }

    pub fn runs_of(&self, name: &str) -> usize {
        self.runs.get(name).copied().unwrap_or(0)
    }

    /// One line per invariant.
    pub fn summary(&self) -> String {
        ALL.iter()
            .map(|name| {
                let first = self
                    .violations
                    .get(name)
                    .and_then(|v| v.first())
                    .map_or(String::new(), |m| format!(": {m}"));
                format!(
                    "{name}: {} over {} runs{first}",
                    if self.passed(name) { "ok" } else { "VIOLATED" },
                    self.runs_of(name)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn config(seed: u64, iterations: u64) -> PlannerConfig {
    PlannerConfig {
        budget: Budget::iterations(iterations),
        seed,
        ..PlannerConfig::default()
    }
}

fn check_solution(case: &Case, r: &PlanResult) -> Result<(), String> {
    let Some(path) = r.path() else {
        return if r.is_solved() {
            Err("solved without a path".into())
        } else {
            Ok(())
        };
    };
    let q = &case.query;
    if euclidean(&path[0], &q.start) > TOL || euclidean(path.last().unwrap(), &q.goal) > TOL {
        return Err("path endpoints differ from the query".into());
    }
    for leg in path.windows(2) {
        if !case.scene.is_motion_valid(&leg[0], &leg[1]).unwrap() {
            return Err("a path leg collides".into());
        }
    }
    let cost = r.cost().unwrap();
    let len = polyline_length(path);
    if (cost - len).abs() > 1e-6 * len.max(1e-12) {
        return Err(format!("reported cost {cost} but length {len}"));
    }
    Ok(())
}

/// Points spread along `path` by arc length.
fn points_along(path: &[Vec<f64>], per_leg: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for leg in path.windows(2) {
        for k in 0..per_leg {
            let t = k as f64 / per_leg as f64;
            out.push(leg[0].iter().zip(&leg[1]).map(|(a, b)| a + t * (b - a)).collect());
        }
    }
    out.extend(path.last().cloned());
    out
}

/// Runs the planner on `case` and checks every in-run invariant, then runs it
/// again to check determinism.
pub fn check_run(case: &Case, iterations: u64, report: &mut Report) {
    let cfg = config(case.seed, iterations);
    let q = &case.query;
    let mut tree_errors = Vec::new();
    let mut prune_errors = Vec::new();
    let mut reject_errors = Vec::new();
    let (mut prunes, mut rejections) = (0, 0);
    let mut last_best = f64::INFINITY;
    let mut step = 0usize;
    let result = plan_observed(q, &case.scene, &case.library, &cfg, |event| match event {
        PlanEvent::Iteration { trees, best } => {
            step += 1;
            for t in trees {
                if let Err(e) = t.check_invariants(TOL) {
                    tree_errors.push(format!("{} iteration {step}: {e}", case.label));
                }
            }
            // sample the incumbent whenever it changes
            if let Some(best) = best {
                if best.cost < last_best {
                    last_best = best.cost;
                    for p in points_along(&best.path, 8) {
                        if reject_sample(&p, best.cost * (1.0 + 1e-12) + TOL, q) {
                            reject_errors.push(format!("{}: point on incumbent rejected", case.label));
                        }
                    }
                }
            }
        }
        PlanEvent::Rejected { q: sample, best_cost } => {
            rejections += 1;
            if heuristic_cost(sample, &q.start, &q.goal) <= best_cost {
                reject_errors.push(format!("{}: kept-region sample rejected", case.label));
            }
        }
        PlanEvent::Pruned { trees, best } => {
            prunes += 1;
            for t in trees {
                if !t.contains(t.root()) {
                    prune_errors.push(format!("{}: root removed", case.label));
                }
                for id in t.ids() {
                    if id != t.root() && heuristic_cost(&t.state(id).q, &q.start, &q.goal) > best.cost {
                        prune_errors.push(format!("{}: node above c_best survived", case.label));
                    }
                }
            }
            for p in &best.path {
                if heuristic_cost(p, &q.start, &q.goal) > best.cost + TOL {
                    prune_errors.push(format!("{}: incumbent waypoint outside the informed set", case.label));
                }
            }
        }
    })
    .unwrap();

    report.ran(TREE_CONSISTENCY);
    for e in tree_errors {
        report.fail(TREE_CONSISTENCY, e);
    }
    report.ran(PRUNE_SAFETY);
    for e in prune_errors {
        report.fail(PRUNE_SAFETY, e);
    }
    report.ran(REJECTION_SOUNDNESS);
    for e in reject_errors {
        report.fail(REJECTION_SOUNDNESS, e);
    }
    report.prunes += prunes;
    report.rejections += rejections;

    report.ran(ANYTIME_MONOTONICITY);
    if !result.trace.is_non_increasing() {
        report.fail(ANYTIME_MONOTONICITY, format!("{}: trace increases", case.label));
    }
    if result.trace.last_cost() != result.cost() {
        report.fail(ANYTIME_MONOTONICITY, format!("{}: last trace value differs from cost", case.label));
    }

    report.ran(SOLUTION_VALIDITY);
    if let Err(e) = check_solution(case, &result) {
        report.fail(SOLUTION_VALIDITY, format!("{}: {e}", case.label));
    }
    report.solved += result.is_solved() as usize;

    report.ran(DETERMINISM);
    let again = plan_observed(q, &case.scene, &case.library, &cfg, |_| {}).unwrap();
    if again != result {
        report.fail(DETERMINISM, format!("{}: repeated run differs", case.label));
    }
}

fn straight(a: &PlannerState, b: &PlannerState, m: usize) -> MicroSegment {
    MicroSegment::straight(a, b, m)
}

/// Random tree of `size` nodes (root included) with straight edges. Nodes
/// hang off random earlier nodes; collisions are irrelevant to the bookkeeping.
fn random_tree(scene: &Scene, size: usize, m: usize, rng: &mut ChaCha8Rng) -> SearchTree {
    let root = random_valid(scene, rng);
    let mut tree = SearchTree::new(root, Orientation::FromStart, m);
    let mut ids = vec![tree.root()];
    for _ in 1..size {
        let parent = ids[rng.gen_range(0..ids.len())];
        let phase = (tree.state(parent).phase + 1).min(m - 1);
        let s = PlannerState::new(random_valid(scene, rng), phase);
        let edge = straight(tree.state(parent), &s, m);
        ids.push(tree.add(s, parent, edge));
    }
    tree
}

/// Three-waypoint polyline from `a` to `b` through a displaced midpoint.
fn bent(a: &PlannerState, b: &PlannerState, m: usize, bulge: &[f64]) -> MicroSegment {
    let mid: Vec<f64> = a.q.iter().zip(&b.q).zip(bulge).map(|((x, y), d)| 0.5 * (x + y) + d).collect();
    let mid_phase = 0.5 * (a.phase + b.phase) as f64 / m as f64;
    MicroSegment::new(
        vec![a.q.clone(), mid, b.q.clone()],
        vec![a.phase as f64 / m as f64, mid_phase, b.phase as f64 / m as f64],
        a.phase,
        b.phase,
    )
}

/// Compares one rewire call on a random tree of at most 30 nodes against an
/// exhaustive evaluation of every candidate parent and neighbour.
pub fn check_rewire_oracle(family: Family, seed: u64, report: &mut Report) {
    report.ran(REWIRE_MONOTONICITY);
    let scene = generate_scene(&family.template(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 31));
    let m = 10;
    let size = rng.gen_range(2..=29);
    let mut tree = random_tree(&scene, size, m, &mut rng);
    let ids: Vec<NodeId> = tree.ids().collect();
    let init = ids[rng.gen_range(0..ids.len())];
    let target = PlannerState::new(random_valid(&scene, &mut rng), (tree.state(init).phase + 1).min(m));
    let scale = 0.1 * scene.space().diagonal();
    let bulge: Vec<f64> = (0..scene.dim()).map(|_| rng.gen_range(-scale..=scale)).collect();
    let segment = bent(tree.state(init), &target, m, &bulge);
    let radius = rng.gen_range(0.1..0.6) * scene.space().diagonal();
    let neighbours = near(&tree, &target.q, &NearRadius::Fixed { radius }, &scene);

    let before: BTreeMap<NodeId, f64> = ids.iter().map(|&id| (id, tree.cost(id))).collect();
    let free = |a: &[f64], b: &[f64]| scene.is_motion_valid(a, b).unwrap();
    let mut expected = before[&init] + segment.cost;
    for &s in &neighbours {
        if free(&tree.state(s).q, &target.q) {
            expected = expected.min(before[&s] + euclidean(&tree.state(s).q, &target.q));
        }
    }

    let watch = Stopwatch::start(Clock::default());
    let checker = Checker::new(&scene, &watch);
    let (_, new) = rewire(&mut tree, init, target.clone(), segment, &neighbours, &checker);
    let label = format!("{family:?}-{seed}");
    if (tree.cost(new) - expected).abs() > TOL {
        report.fail(REWIRE_MONOTONICITY, format!("{label}: arrival {} but oracle {expected}", tree.cost(new)));
    }
    for &id in &ids {
        if tree.cost(id) > before[&id] + TOL {
            report.fail(REWIRE_MONOTONICITY, format!("{label}: node cost increased"));
        }
    }
    for &s in &neighbours {
        if s == tree.root() || tree.parent(new) == Some(s) {
            continue;
        }
        let via = tree.cost(new) + euclidean(&target.q, &tree.state(s).q);
        if via < before[&s] - TOL && free(&target.q, &tree.state(s).q) && tree.cost(s) > via + TOL {
            report.fail(REWIRE_MONOTONICITY, format!("{label}: improvable neighbour left unchanged"));
        }
    }
    if let Err(e) = tree.check_invariants(TOL) {
        report.fail(REWIRE_MONOTONICITY, format!("{label}: {e}"));
    }
}

/// Extends a random tree with a bent exploratory segment and checks that any
/// straight replacement never costs more than the segment.
pub fn check_shortcut(family: Family, seed: u64, report: &mut Report) {
    report.ran(SHORTCUT_DOMINANCE);
    let scene = generate_scene(&family.template(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 47));
    let m = 10;
    let mut tree = random_tree(&scene, rng.gen_range(1..=20), m, &mut rng);
    let ids: Vec<NodeId> = tree.ids().collect();
    let init = ids[rng.gen_range(0..ids.len())];
    let scale = 0.05 * scene.space().diagonal();
    let q: Vec<f64> = tree.state(init).q.iter().map(|x| x + rng.gen_range(-3.0 * scale..=3.0 * scale)).collect();
    let target = PlannerState::new(q, (tree.state(init).phase + 1).min(m));
    let bulge: Vec<f64> = (0..scene.dim()).map(|_| rng.gen_range(-scale..=scale)).collect();
    let segment = bent(tree.state(init), &target, m, &bulge);
    let original = segment.cost;
    let init_cost = tree.cost(init);
    let watch = Stopwatch::start(Clock::default());
    let checker = Checker::new(&scene, &watch);
    let radius = NearRadius::Fixed { radius: 0.0 };
    let label = format!("{family:?}-{seed}");
    match extend(&mut tree, segment, init, target, true, &checker, &radius) {
        Extension::Failed => {}
        Extension::Advanced(new) => {
            let edge = tree.edge(new).unwrap();
            if tree.parent(new) == Some(init) && edge.cost > original + TOL {
                report.fail(SHORTCUT_DOMINANCE, format!("{label}: stored edge dearer than the segment"));
            }
            if tree.cost(new) > init_cost + original + TOL {
                report.fail(SHORTCUT_DOMINANCE, format!("{label}: arrival dearer than through the segment"));
            }
        }
    }
}

/// The full sweep: planner runs on 2-D and 6-D point scenes and arm scenes,
/// plus the rewire and shortcut oracles on the same families.
pub fn sweep(point_runs: usize, arm_runs: usize, iterations: u64) -> Report {
    let mut report = Report::default();
    let mut families = Vec::new();
    for i in 0..point_runs {
        families.push(if i % 2 == 0 { Family::Point2 } else { Family::Point6 });
    }
    families.extend(std::iter::repeat(Family::Arm).take(arm_runs));
    for (i, &family) in families.iter().enumerate() {
        let seed = 1000 + i as u64;
        check_run(&case(family, seed), iterations, &mut report);
        check_rewire_oracle(family, seed, &mut report);
        check_shortcut(family, seed, &mut report);
    }
    report
}
