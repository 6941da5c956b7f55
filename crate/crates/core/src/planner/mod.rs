//! The experience-driven bidirectional planner.
//!
//! Two trees grow from the start and the goal over `⟨q, phase⟩` states. Each
//! iteration slices the mapped experience between the phase of a random node
//! and a later phase, morphs the slice onto that node, and adds its end as a
//! new node. Straight-line shortcuts and rewiring keep edges cheap where the
//! space is open; once a solution exists, samples that cannot improve it are
//! rejected and the trees are pruned.

mod iertc;
mod rewire;
mod segment;
mod tree;

use serde::{Deserialize, Serialize};

use crate::clock::{Budget, Stopwatch};
use crate::cspace::Scene;
use crate::error::{Error, Result};

pub use iertc::{
    assemble_path, plan, plan_observed, try_connect, Connection, Incumbent, IncumbentUpdate,
    PlanEvent,
};
pub(crate) use rewire::charged_near;
pub use rewire::{
    extend, heuristic_cost, near, prune, reject_sample, rewire, select_node, Extension,
};
pub use segment::{extract_segment, generate_segment, morph_segment, sample_segment_end};
pub use tree::{MicroSegment, NodeId, Orientation, PlannerState, SearchTree};

/// Start and goal configurations of a planning problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
}

impl Query {
    pub fn new(start: Vec<f64>, goal: Vec<f64>) -> Self {
        Query { start, goal }
    }

    /// Fails unless both endpoints have the scene's dimension and are valid.
    pub fn validate(&self, scene: &Scene) -> Result<()> {
        for (name, q) in [("start", &self.start), ("goal", &self.goal)] {
            if !scene.is_state_valid(q)? {
                return Err(Error::InvalidQuery(format!(
                    "{name} configuration is in collision or out of bounds"
                )));
            }
        }
        Ok(())
    }
}

/// Radius of the neighbourhood used for rewiring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NearRadius {
    Fixed {
        radius: f64,
    },
    /// `min(gamma * (ln n / n)^(1/d), r_max)` with `r_max` a tenth of the
    /// space diagonal. Without an explicit `gamma`,
    /// `gamma = 2 (1 + 1/d)^(1/d) * (measure / unit_ball_volume)^(1/d)`.
    ShrinkingBall {
        gamma: Option<f64>,
    },
}

impl Default for NearRadius {
    fn default() -> Self {
        NearRadius::ShrinkingBall { gamma: None }
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

impl NearRadius {
    pub fn radius(&self, tree_size: usize, scene: &Scene) -> f64 {
        match *self {
            NearRadius::Fixed { radius } => radius,
            NearRadius::ShrinkingBall { gamma } => {
                let space = scene.space();
                let d = space.dim() as f64;
                let gamma = gamma.unwrap_or_else(|| {
                    let ratio = space.measure() / unit_ball_volume(space.dim());
                    2.0 * (1.0 + 1.0 / d).powf(1.0 / d) * ratio.powf(1.0 / d)
                });
                let n = tree_size.max(1) as f64;
                let r_max = 0.1 * space.diagonal();
                (gamma * (n.ln() / n).powf(1.0 / d)).min(r_max)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Number of phase divisions.
    pub m: usize,
    /// Exploratory shear magnitude as a fraction of the slice length.
    pub epsilon: f64,
    /// Minimum cost improvement that triggers pruning.
    pub prune_threshold: f64,
    pub near: NearRadius,
    pub budget: Budget,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            m: 20,
            epsilon: 0.2,
            prune_threshold: 0.0,
            near: NearRadius::default(),
            budget: Budget::seconds(3.0),
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!(
                "m must be at least 2, got {}",
                self.m
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
        }
        if !(self.prune_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "prune threshold must be nonnegative".into(),
            ));
        }
        if let NearRadius::Fixed { radius } = self.near {
            if !(radius >= 0.0) {
                return Err(Error::InvalidConfig(
                    "near radius must be nonnegative".into(),
                ));
            }
        }
        self.budget.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Solved,
    TimedOut,
}

/// Best-cost samples over the course of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub samples: Vec<(f64, f64)>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, elapsed: f64, cost: f64) {
        self.samples.push((elapsed, cost));
    }

    pub fn is_non_increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    pub fn last_cost(&self) -> Option<f64> {
        self.samples.last().map(|s| s.1)
    }

    /// Best cost known at `t`, if any solution existed by then.
    pub fn cost_at(&self, t: f64) -> Option<f64> {
        let k = self.samples.partition_point(|s| s.0 <= t);
        (k > 0).then(|| self.samples[k - 1].1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub path: Vec<Vec<f64>>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub solution: Option<Solution>,
    pub time_to_first_solution: Option<f64>,
    pub iterations: u64,
    pub elapsed: f64,
    pub trace: ConvergenceTrace,
}

impl PlanResult {
    pub fn cost(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.cost)
    }

    pub fn path(&self) -> Option<&[Vec<f64>]> {
        self.solution.as_ref().map(|s| s.path.as_slice())
    }

    pub fn is_solved(&self) -> bool {
        self.status == PlanStatus::Solved
    }
}

/// Work charged per waypoint of a newly built polyline, on top of its
/// coordinates.
const WAYPOINT_BUILD_COST: usize = 8;

/// Validity checks that charge their work to a stopwatch.
#[derive(Debug)]
pub struct Checker<'a> {
    scene: &'a Scene,
    watch: &'a Stopwatch,
    state_cost: u64,
}

impl<'a> Checker<'a> {
    pub fn new(scene: &'a Scene, watch: &'a Stopwatch) -> Self {
        Checker {
            scene,
            watch,
            state_cost: scene.state_check_cost(),
        }
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn watch(&self) -> &'a Stopwatch {
        self.watch
    }

    pub fn state(&self, q: &[f64]) -> bool {
        self.watch.charge(self.state_cost);
        self.scene.state_valid(q)
    }

    pub fn motion(&self, a: &[f64], b: &[f64]) -> bool {
        let (ok, n) = self.scene.motion_valid(a, b);
        self.watch.charge(n * self.state_cost);
        ok
    }

    pub fn segment(&self, waypoints: &[Vec<f64>]) -> bool {
        let (ok, n) = self.scene.segment_valid(waypoints);
        self.watch.charge(n * self.state_cost);
        ok
    }

    /// Charges the construction of a polyline.
    pub fn build(&self, waypoints: &[Vec<f64>]) {
        let dim = waypoints.first().map_or(0, Vec::len);
        self.watch
            .charge((waypoints.len() * (WAYPOINT_BUILD_COST + dim)) as u64);
    }

    /// Charges a linear scan over `nodes` tree nodes.
    pub fn scan(&self, nodes: usize) {
        self.watch.charge(nodes as u64);
    }
}
