use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rewire::{extend, prune, reject_sample, select_node, Extension};
use super::segment::generate_segment;
use super::tree::{MicroSegment, NodeId, Orientation, SearchTree};
use super::{Checker, ConvergenceTrace, PlanResult, PlanStatus, PlannerConfig, Query, Solution};
use crate::clock::Stopwatch;
use crate::cspace::{euclidean, Scene};
use crate::error::{check_dim, Result};
use crate::experience::{
    discretize_phases, map_experience, retrieve_index, ExperiencePath, PathLibrary,
};

/// Interval between heartbeat samples of the convergence trace, in seconds.
pub const HEARTBEAT: f64 = 0.1;

/// Fixed bookkeeping charge per iteration, in work units.
const ITERATION_COST: u64 = 16;

/// Distance below which a new node counts as having reached the other root.
const REACH_TOLERANCE: f64 = 1e-9;

/// Best solution found so far and its improvement history.
#[derive(Clone, Debug, Default)]
pub struct Incumbent {
    pub solution: Option<Solution>,
    pub trace: ConvergenceTrace,
    pub first_solution_at: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IncumbentUpdate {
    pub accepted: bool,
    pub prune: bool,
}

impl Incumbent {
    pub fn new() -> Self {
        Incumbent::default()
    }

    pub fn best_cost(&self) -> f64 {
        self.solution.as_ref().map_or(f64::INFINITY, |s| s.cost)
    }

    /// Replaces the incumbent only with a strictly cheaper candidate. Pruning
    /// is requested when the improvement reaches `prune_threshold`.
    pub fn offer(
        &mut self,
        path: Vec<Vec<f64>>,
        cost: f64,
        elapsed: f64,
        prune_threshold: f64,
    ) -> IncumbentUpdate {
        let old = self.best_cost();
        if !(cost < old) {
            return IncumbentUpdate {
                accepted: false,
                prune: false,
            };
        }
        self.solution = Some(Solution { path, cost });
        self.trace.push(elapsed, cost);
        self.first_solution_at.get_or_insert(elapsed);
        IncumbentUpdate {
            accepted: true,
            prune: old - cost >= prune_threshold,
        }
    }
}

/// A joined start-to-goal path.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    pub path: Vec<Vec<f64>>,
    pub cost: f64,
}

/// Joins the root paths of two nodes holding the same configuration, one in
/// each tree, into a start-to-goal path.
pub fn assemble_path(a: &SearchTree, a_node: NodeId, b: &SearchTree, b_node: NodeId) -> Connection {
    let (start_tree, start_node, goal_tree, goal_node) = match a.orientation() {
        Orientation::FromStart => (a, a_node, b, b_node),
        Orientation::FromGoal => (b, b_node, a, a_node),
    };
    let mut path = start_tree.path_from_root(start_node);
    let mut tail = goal_tree.path_from_root(goal_node);
    tail.reverse();
    path.extend(tail.into_iter().skip(1));
    Connection {
        path,
        cost: start_tree.cost(start_node) + goal_tree.cost(goal_node),
    }
}

/// Tries to bridge node `target` of `active` to the nearest node of `other`
/// with a targeted micro-segment. On success the target state is added to
/// `other` and the joined path is returned.
pub fn try_connect<R: Rng + ?Sized>(
    active: &SearchTree,
    other: &mut SearchTree,
    target: NodeId,
    experience: &ExperiencePath,
    checker: &Checker<'_>,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Option<Connection> {
    let target_state = active.state(target).clone();
    checker.scan(other.len());
    let near = other.nearest(&target_state.q);
    let near_state = other.state(near).clone();
    let bridge = if near_state.phase == target_state.phase {
        MicroSegment::straight(&near_state, &target_state, other.divisions())
    } else {
        generate_segment(
            &near_state,
            Some(&target_state),
            experience,
            other.orientation(),
            cfg.epsilon,
            rng,
        )
        .ok()?
        .0
    };
    checker.build(&bridge.waypoints);
    match extend(other, bridge, near, target_state, false, checker, &cfg.near) {
        Extension::Advanced(joined) => Some(assemble_path(active, target, other, joined)),
        Extension::Failed => None,
    }
}

fn solved_trivially(query: &Query) -> PlanResult {
    let mut trace = ConvergenceTrace::default();
    trace.push(0.0, 0.0);
    PlanResult {
        status: PlanStatus::Solved,
        solution: Some(Solution {
            path: vec![query.start.clone(), query.goal.clone()],
            cost: 0.0,
        }),
        time_to_first_solution: Some(0.0),
        iterations: 0,
        elapsed: 0.0,
        trace,
    }
}

/// Progress reported by [`plan_observed`].
#[derive(Debug)]
pub enum PlanEvent<'a> {
    /// End of an iteration that was not rejected. Trees are in
    /// `[start, goal]` order.
    Iteration {
        trees: [&'a SearchTree; 2],
        best: Option<&'a Solution>,
    },
    /// A sample discarded by informed rejection.
    Rejected { q: &'a [f64], best_cost: f64 },
    /// Both trees right after pruning against `best`.
    Pruned {
        trees: [&'a SearchTree; 2],
        best: &'a Solution,
    },
}

/// Runs the planner on `query` until the budget is spent and returns the best
/// path found.
pub fn plan(
    query: &Query,
    scene: &Scene,
    library: &PathLibrary,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    plan_observed(query, scene, library, cfg, |_| {})
}

/// [`plan`], reporting progress to `observe`.
pub fn plan_observed<F: FnMut(PlanEvent<'_>)>(
    query: &Query,
    scene: &Scene,
    library: &PathLibrary,
    cfg: &PlannerConfig,
    mut observe: F,
) -> Result<PlanResult> {
    cfg.validate()?;
    check_dim(scene.dim(), query.start.len())?;
    check_dim(scene.dim(), query.goal.len())?;
    query.validate(scene)?;
    let index = retrieve_index(library, &query.start, &query.goal)?;
    if euclidean(&query.start, &query.goal) == 0.0 {
        return Ok(solved_trivially(query));
    }

    let watch = Stopwatch::start(cfg.budget.clock);
    let checker = Checker::new(scene, &watch);
    let mapped = map_experience(&library.entries()[index].path, &query.start, &query.goal)?;
    let experience = discretize_phases(&mapped, cfg.m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut trees = [
        SearchTree::new(query.start.clone(), Orientation::FromStart, cfg.m),
        SearchTree::new(query.goal.clone(), Orientation::FromGoal, cfg.m),
    ];
    let mut active = 0;
    let mut incumbent = Incumbent::new();
    let mut iterations = 0u64;
    let mut next_heartbeat = HEARTBEAT;

    while !cfg.budget.exhausted(&watch, iterations) {
        iterations += 1;
        watch.charge(ITERATION_COST);
        let now = watch.elapsed();
        if now >= next_heartbeat {
            if let Some(s) = &incumbent.solution {
                incumbent.trace.push(now, s.cost);
            }
            next_heartbeat = now + HEARTBEAT;
        }

        let (left, right) = trees.split_at_mut(1);
        let (tree, other) = if active == 0 {
            (&mut left[0], &mut right[0])
        } else {
            (&mut right[0], &mut left[0])
        };

        let Ok(init_id) = select_node(tree, &mut rng) else {
            active = 1 - active;
            continue;
        };
        let init = tree.state(init_id).clone();
        let (segment, target) = generate_segment(
            &init,
            None,
            &experience,
            tree.orientation(),
            cfg.epsilon,
            &mut rng,
        )?;
        checker.build(&segment.waypoints);

        if incumbent.solution.is_some() && reject_sample(&target.q, incumbent.best_cost(), query) {
            observe(PlanEvent::Rejected {
                q: &target.q,
                best_cost: incumbent.best_cost(),
            });
            continue;
        }

        let mut pruned = false;
        if let Extension::Advanced(new) =
            extend(tree, segment, init_id, target, true, &checker, &cfg.near)
        {
            let other_root = other.root();
            if euclidean(&tree.state(new).q, &other.state(other_root).q) <= REACH_TOLERANCE {
                let c = assemble_path(tree, new, other, other_root);
                let update = incumbent.offer(c.path, c.cost, watch.elapsed(), cfg.prune_threshold);
                if update.prune {
                    prune([&mut *tree, &mut *other], incumbent.best_cost(), query);
                    pruned = true;
                }
            }
            if tree.contains(new) {
                if let Some(c) = try_connect(tree, other, new, &experience, &checker, cfg, &mut rng)
                {
                    let update =
                        incumbent.offer(c.path, c.cost, watch.elapsed(), cfg.prune_threshold);
                    if update.prune {
                        prune([&mut *tree, &mut *other], incumbent.best_cost(), query);
                        pruned = true;
                    }
                }
            }
        }
        let [start_tree, goal_tree] = &trees;
        if pruned {
            if let Some(best) = &incumbent.solution {
                observe(PlanEvent::Pruned {
                    trees: [start_tree, goal_tree],
                    best,
                });
            }
        }
        observe(PlanEvent::Iteration {
            trees: [start_tree, goal_tree],
            best: incumbent.solution.as_ref(),
        });
        active = 1 - active;
    }

    let elapsed = watch.elapsed();
    let mut trace = incumbent.trace;
    let status = match &incumbent.solution {
        Some(s) => {
            trace.push(elapsed, s.cost);
            PlanStatus::Solved
        }
        None => PlanStatus::TimedOut,
    };
    Ok(PlanResult {
        status,
        solution: incumbent.solution,
        time_to_first_solution: incumbent.first_solution_at,
        iterations,
        elapsed,
        trace,
    })
}
