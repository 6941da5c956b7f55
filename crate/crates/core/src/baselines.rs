//! Baseline planners: RRT-Connect for fast feasible paths and RRT* for
//! asymptotically optimal ones. Both use straight edges only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{Budget, Stopwatch};
use crate::cspace::{euclidean, polyline_length, Scene};
use crate::error::{check_dim, Error, Result};
use crate::planner::{
    charged_near, rewire, Checker, ConvergenceTrace, Incumbent, MicroSegment, NearRadius, NodeId,
    Orientation, PlanResult, PlanStatus, PlannerState, Query, SearchTree, Solution,
};

const ITERATION_COST: u64 = 16;
const HEARTBEAT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Extension step; `None` means 5% of the space diagonal.
    pub step: Option<f64>,
    pub goal_bias: f64,
    pub near: NearRadius,
    pub budget: Budget,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            step: None,
            goal_bias: 0.05,
            near: NearRadius::default(),
            budget: Budget::seconds(3.0),
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn step_for(&self, scene: &Scene) -> f64 {
        self.step.unwrap_or(0.05 * scene.space().diagonal())
    }

    fn validate(&self, scene: &Scene) -> Result<()> {
        let step = self.step_for(scene);
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step must be positive, got {step}"
            )));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidConfig("goal bias must lie in [0, 1]".into()));
        }
        self.budget.validate()
    }
}

fn check_inputs(query: &Query, scene: &Scene, cfg: &BaselineConfig) -> Result<()> {
    cfg.validate(scene)?;
    check_dim(scene.dim(), query.start.len())?;
    check_dim(scene.dim(), query.goal.len())?;
    query.validate(scene)
}

/// Point at most `step` from `from` towards `to`; `to` itself when closer.
fn steer(from: &[f64], to: &[f64], step: f64) -> Vec<f64> {
    let d = euclidean(from, to);
    if d <= step {
        return to.to_vec();
    }
    let t = step / d;
    from.iter().zip(to).map(|(a, b)| a + (b - a) * t).collect()
}

// configurations packed row by row
struct PlainTree {
    points: Vec<f64>,
    parents: Vec<Option<usize>>,
    dim: usize,
}

impl PlainTree {
    fn new(root: Vec<f64>) -> Self {
        PlainTree {
            dim: root.len(),
            points: root,
            parents: vec![None],
        }
    }

    fn len(&self) -> usize {
        self.parents.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn push(&mut self, q: &[f64], parent: usize) -> usize {
        self.points.extend_from_slice(q);
        self.parents.push(Some(parent));
        self.len() - 1
    }

    fn nearest(&self, q: &[f64], checker: &Checker<'_>) -> usize {
        checker.scan(self.len());
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn path_from_root(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut path = vec![self.point(i).to_vec()];
        while let Some(p) = self.parents[i] {
            path.push(self.point(p).to_vec());
            i = p;
        }
        path.reverse();
        path
    }
}

enum Step {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend_towards(tree: &mut PlainTree, target: &[f64], step: f64, checker: &Checker<'_>) -> Step {
    let near = tree.nearest(target, checker);
    let q_new = steer(tree.point(near), target, step);
    if !checker.motion(tree.point(near), &q_new) {
        return Step::Trapped;
    }
    let reached = euclidean(&q_new, target) == 0.0;
    let id = tree.push(&q_new, near);
    if reached {
        Step::Reached(id)
    } else {
        Step::Advanced(id)
    }
}

fn timed_out(iterations: u64, elapsed: f64, trace: ConvergenceTrace) -> PlanResult {
    PlanResult {
        status: PlanStatus::TimedOut,
        solution: None,
        time_to_first_solution: None,
        iterations,
        elapsed,
        trace,
    }
}

/// Bidirectional RRT-Connect. Returns as soon as the trees meet.
pub fn rrt_connect(query: &Query, scene: &Scene, cfg: &BaselineConfig) -> Result<PlanResult> {
    check_inputs(query, scene, cfg)?;
    let watch = Stopwatch::start(cfg.budget.clock);
    let checker = Checker::new(scene, &watch);
    let step = cfg.step_for(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = PlainTree::new(query.start.clone());
    let mut b = PlainTree::new(query.goal.clone());
    let mut a_is_start = true;
    let mut iterations = 0;

    while !cfg.budget.exhausted(&watch, iterations) {
        iterations += 1;
        watch.charge(ITERATION_COST);
        let sample = if rng.gen::<f64>() < cfg.goal_bias {
            b.point(0).to_vec()
        } else {
            scene.space().sample_uniform(&mut rng)
        };
        let new = match extend_towards(&mut a, &sample, step, &checker) {
            Step::Trapped => None,
            Step::Advanced(i) | Step::Reached(i) => Some(i),
        };
        if let Some(new) = new {
            let target = a.point(new).to_vec();
            let joined = loop {
                match extend_towards(&mut b, &target, step, &checker) {
                    Step::Trapped => break None,
                    Step::Advanced(_) => {
                        if cfg.budget.exhausted(&watch, iterations) {
                            break None;
                        }
                    }
                    Step::Reached(j) => break Some(j),
                }
            };
            if let Some(j) = joined {
                let mut path = a.path_from_root(new);
                let mut tail = b.path_from_root(j);
                tail.reverse();
                path.extend(tail.into_iter().skip(1));
                if !a_is_start {
                    path.reverse();
                }
                let cost = polyline_length(&path);
                let elapsed = watch.elapsed();
                let mut trace = ConvergenceTrace::default();
                trace.push(elapsed, cost);
                return Ok(PlanResult {
                    status: PlanStatus::Solved,
                    solution: Some(Solution { path, cost }),
                    time_to_first_solution: Some(elapsed),
                    iterations,
                    elapsed,
                    trace,
                });
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    Ok(timed_out(
        iterations,
        watch.elapsed(),
        ConvergenceTrace::default(),
    ))
}

/// Single-tree RRT* with goal biasing, choose-parent and rewiring. Runs until
/// the budget is spent and returns the best path to the goal.
pub fn rrt_star(query: &Query, scene: &Scene, cfg: &BaselineConfig) -> Result<PlanResult> {
    check_inputs(query, scene, cfg)?;
    let watch = Stopwatch::start(cfg.budget.clock);
    let checker = Checker::new(scene, &watch);
    let step = cfg.step_for(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // every node shares phase 0; the phase grid plays no role here
    let mut tree = SearchTree::new(query.start.clone(), Orientation::FromStart, 1);
    let mut goal: Option<NodeId> = None;
    let mut incumbent = Incumbent::new();
    let mut iterations = 0;
    let mut next_heartbeat = HEARTBEAT;

    if euclidean(&query.start, &query.goal) == 0.0 {
        incumbent.offer(vec![query.start.clone(), query.goal.clone()], 0.0, 0.0, 0.0);
        goal = Some(tree.root());
    }

    while goal != Some(tree.root()) && !cfg.budget.exhausted(&watch, iterations) {
        iterations += 1;
        watch.charge(ITERATION_COST);
        let now = watch.elapsed();
        if now >= next_heartbeat {
            if let Some(s) = &incumbent.solution {
                incumbent.trace.push(now, s.cost);
            }
            next_heartbeat = now + HEARTBEAT;
        }
        let sample = if rng.gen::<f64>() < cfg.goal_bias {
            query.goal.clone()
        } else {
            scene.space().sample_uniform(&mut rng)
        };
        checker.scan(tree.len());
        let nearest = tree.nearest(&sample);
        let q_new = steer(&tree.state(nearest).q, &sample, step);
        let is_goal = q_new == query.goal;
        if (is_goal && goal.is_some()) || !checker.motion(&tree.state(nearest).q, &q_new) {
            continue;
        }
        let target = PlannerState::new(q_new, 0);
        let segment = MicroSegment::straight(tree.state(nearest), &target, 1);
        let neighbours = charged_near(&tree, &target.q, &cfg.near, &checker);
        let (_, new) = rewire(&mut tree, nearest, target, segment, &neighbours, &checker);
        if is_goal {
            goal = Some(new);
        }
        if let Some(g) = goal {
            if tree.cost(g) < incumbent.best_cost() {
                let path = tree.path_from_root(g);
                incumbent.offer(path, tree.cost(g), watch.elapsed(), 0.0);
            }
        }
    }

    let elapsed = watch.elapsed();
    let mut trace = incumbent.trace;
    match incumbent.solution {
        Some(solution) => {
            trace.push(elapsed, solution.cost);
            Ok(PlanResult {
                status: PlanStatus::Solved,
                solution: Some(solution),
                time_to_first_solution: incumbent.first_solution_at,
                iterations,
                elapsed,
                trace,
            })
        }
        None => Ok(timed_out(iterations, elapsed, trace)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Clock;
    use crate::cspace::{ConfigSpace, Obstacle, RobotModel};

    fn open() -> Scene {
        Scene::with_default_resolution(
            ConfigSpace::cube(2, 0.0, 1.0).unwrap(),
            RobotModel::PointRobot,
            vec![],
        )
        .unwrap()
    }

    fn check_solution(r: &PlanResult, q: &Query, scene: &Scene) {
        let path = r.path().unwrap();
        assert_eq!(path.first().unwrap(), &q.start);
        assert_eq!(path.last().unwrap(), &q.goal);
        for w in path.windows(2) {
            assert!(scene.is_motion_valid(&w[0], &w[1]).unwrap());
        }
        let len = polyline_length(path);
        assert!((len - r.cost().unwrap()).abs() <= 1e-6 * len.max(1.0));
    }

    #[test]
    fn steer_clamps_to_step() {
        assert_eq!(steer(&[0.0, 0.0], &[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let s = steer(&[0.0, 0.0], &[3.0, 4.0], 1.0);
        assert!((euclidean(&s, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn connect_solves_open_scene() {
        let scene = open();
        let q = Query::new(vec![0.1, 0.1], vec![0.9, 0.8]);
        let r = rrt_connect(&q, &scene, &BaselineConfig::default()).unwrap();
        assert!(r.is_solved());
        check_solution(&r, &q, &scene);
    }

    #[test]
    fn connect_times_out_on_enclosed_goal() {
        let walls = vec![
            Obstacle::AxisBox {
                min: vec![0.6, 0.6],
                max: vec![0.9, 0.65],
            },
            Obstacle::AxisBox {
                min: vec![0.6, 0.85],
                max: vec![0.9, 0.9],
            },
            Obstacle::AxisBox {
                min: vec![0.6, 0.6],
                max: vec![0.65, 0.9],
            },
            Obstacle::AxisBox {
                min: vec![0.85, 0.6],
                max: vec![0.9, 0.9],
            },
        ];
        let scene = Scene::with_default_resolution(
            ConfigSpace::cube(2, 0.0, 1.0).unwrap(),
            RobotModel::PointRobot,
            walls,
        )
        .unwrap();
        let q = Query::new(vec![0.1, 0.1], vec![0.75, 0.75]);
        let cfg = BaselineConfig {
            budget: Budget::seconds(0.2).with_clock(Clock::Work {
                units_per_second: 1e6,
            }),
            ..BaselineConfig::default()
        };
        assert_eq!(
            rrt_connect(&q, &scene, &cfg).unwrap().status,
            PlanStatus::TimedOut
        );
        assert_eq!(
            rrt_star(&q, &scene, &cfg).unwrap().status,
            PlanStatus::TimedOut
        );
    }

    #[test]
    fn star_is_deterministic_and_monotone() {
        let scene = open();
        let q = Query::new(vec![0.1, 0.1], vec![0.9, 0.8]);
        let cfg = BaselineConfig {
            budget: Budget::seconds(0.3),
            seed: 3,
            ..BaselineConfig::default()
        };
        let a = rrt_star(&q, &scene, &cfg).unwrap();
        let b = rrt_star(&q, &scene, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_solved());
        assert!(a.trace.is_non_increasing());
        assert_eq!(a.trace.last_cost(), a.cost());
        check_solution(&a, &q, &scene);
    }

    #[test]
    fn rejects_invalid_config() {
        let scene = open();
        let q = Query::new(vec![0.1, 0.1], vec![0.9, 0.8]);
        let cfg = BaselineConfig {
            goal_bias: 1.5,
            ..BaselineConfig::default()
        };
        assert!(rrt_connect(&q, &scene, &cfg).is_err());
        let cfg = BaselineConfig {
            step: Some(0.0),
            ..BaselineConfig::default()
        };
        assert!(rrt_star(&q, &scene, &cfg).is_err());
    }
}
