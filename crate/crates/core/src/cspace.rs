//! Configuration spaces, robot models, obstacle scenes and validity checking.
//!
//! Configurations are plain `[f64]` slices. A point robot collides when the
//! configuration itself lies in an obstacle; a planar arm collides when any of
//! its links, placed by forward kinematics, touches an obstacle in the 2-D
//! workspace. Motions are validated by checking interpolated states along the
//! straight segment at a spacing no larger than the scene resolution.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Euclidean distance between two configurations of equal dimension.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (y - x) * (y - x))
        .sum::<f64>()
        .sqrt()
}

/// Checked Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(euclidean(a, b))
}

/// Length of a polyline through `waypoints`.
pub fn polyline_length(waypoints: &[Vec<f64>]) -> f64 {
    waypoints.windows(2).map(|w| euclidean(&w[0], &w[1])).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConfigSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.len() < 2 {
            return Err(Error::InvalidScene(format!(
                "configuration space needs at least 2 dimensions, got {}",
                lower.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidScene(format!(
                    "axis {i}: bounds [{lo}, {hi}] are not ordered"
                )));
            }
        }
        Ok(ConfigSpace { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        ConfigSpace::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diagonal(&self) -> f64 {
        euclidean(&self.lower, &self.upper)
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Draws each coordinate uniformly from its axis interval.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }
}

/// Free-function form of [`ConfigSpace::sample_uniform`].
pub fn sample_uniform<R: Rng + ?Sized>(space: &ConfigSpace, rng: &mut R) -> Vec<f64> {
    space.sample_uniform(rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotModel {
    PointRobot,
    /// Serial chain of revolute joints in the plane. Joint `i` is relative to
    /// link `i - 1`; joint 0 is relative to the workspace x axis.
    PlanarArm {
        link_lengths: Vec<f64>,
        base: [f64; 2],
    },
}

impl RobotModel {
    /// Positions of the base, each joint and the end effector.
    pub fn arm_points(link_lengths: &[f64], base: [f64; 2], q: &[f64]) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(q.len() + 1);
        let mut p = base;
        let mut heading = 0.0f64;
        pts.push(p);
        for (len, angle) in link_lengths.iter().zip(q) {
            heading += angle;
            p = [p[0] + len * heading.cos(), p[1] + len * heading.sin()];
            pts.push(p);
        }
        pts
    }

    /// Work units per obstacle in a state check; arm links cost extra for
    /// forward kinematics and segment tests.
    fn obstacle_test_cost(&self) -> u64 {
        match self {
            RobotModel::PointRobot => 1,
            RobotModel::PlanarArm { link_lengths, .. } => 2 * link_lengths.len() as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    AxisBox { min: Vec<f64>, max: Vec<f64> },
    Sphere { center: Vec<f64>, radius: f64 },
}

impl Obstacle {
    pub fn dim(&self) -> usize {
        match self {
            Obstacle::AxisBox { min, .. } => min.len(),
            Obstacle::Sphere { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Obstacle::AxisBox { min, max } => {
                check_dim(min.len(), max.len())?;
                if min.iter().zip(max).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidScene("box corners are not ordered".into()));
                }
            }
            Obstacle::Sphere { center, radius } => {
                if center.iter().any(|c| !c.is_finite()) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidScene(
                        "sphere needs a finite center and positive radius".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Closed-set point containment.
    #[inline]
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Obstacle::AxisBox { min, max } => p
                .iter()
                .zip(min.iter().zip(max))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi),
            Obstacle::Sphere { center, radius } => {
                let d2: f64 = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                d2 <= radius * radius
            }
        }
    }

    /// Whether the closed 2-D segment `a`-`b` touches this (2-D) obstacle.
    pub fn intersects_segment_2d(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        match self {
            Obstacle::AxisBox { min, max } => {
                // Liang-Barsky clipping of the parametric segment against the box.
                let d = [b[0] - a[0], b[1] - a[1]];
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for k in 0..2 {
                    if d[k] == 0.0 {
                        if a[k] < min[k] || a[k] > max[k] {
                            return false;
                        }
                        continue;
                    }
                    let mut ta = (min[k] - a[k]) / d[k];
                    let mut tb = (max[k] - a[k]) / d[k];
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                    if t0 > t1 {
                        return false;
                    }
                }
                true
            }
            Obstacle::Sphere { center, radius } => {
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = if len2 > 0.0 {
                    (((center[0] - a[0]) * d[0] + (center[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let p = [a[0] + t * d[0], a[1] + t * d[1]];
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }
}

/// Axis-aligned region of configuration space, used to steer query sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRegions {
    pub start: Region,
    pub goal: Region,
}

/// Default validity resolution as a fraction of the space diagonal.
pub const DEFAULT_RESOLUTION_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    space: ConfigSpace,
    robot: RobotModel,
    obstacles: Vec<Obstacle>,
    delta: f64,
    query_regions: Option<QueryRegions>,
}

/// On-disk layout of a scene.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SceneFile {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    delta: f64,
    robot: RobotModel,
    obstacles: Vec<Obstacle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    query_regions: Option<QueryRegions>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Scene> {
        check_dim(f.dim, f.lower.len())?;
        let space = ConfigSpace::new(f.lower, f.upper)?;
        let mut scene = Scene::new(space, f.robot, f.obstacles, f.delta)?;
        if let Some(r) = f.query_regions {
            scene = scene.with_query_regions(r)?;
        }
        Ok(scene)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> SceneFile {
        SceneFile {
            dim: s.space.dim(),
            lower: s.space.lower,
            upper: s.space.upper,
            delta: s.delta,
            robot: s.robot,
            obstacles: s.obstacles,
            query_regions: s.query_regions,
        }
    }
}

impl Scene {
    pub fn new(
        space: ConfigSpace,
        robot: RobotModel,
        obstacles: Vec<Obstacle>,
        delta: f64,
    ) -> Result<Self> {
        let max_delta = 0.05 * space.diagonal();
        if !(delta > 0.0 && delta <= max_delta) {
            return Err(Error::InvalidScene(format!(
                "resolution {delta} must lie in (0, {max_delta}]"
            )));
        }
        let workspace_dim = match &robot {
            RobotModel::PointRobot => space.dim(),
            RobotModel::PlanarArm { link_lengths, base } => {
                check_dim(space.dim(), link_lengths.len())?;
                if link_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0))
                    || base.iter().any(|b| !b.is_finite())
                {
                    return Err(Error::InvalidScene(
                        "arm links must have positive length".into(),
                    ));
                }
                let pi = std::f64::consts::PI;
                if space.lower.iter().any(|l| *l < -pi) || space.upper.iter().any(|u| *u > pi) {
                    return Err(Error::InvalidScene(
                        "arm joint bounds must lie within [-pi, pi]".into(),
                    ));
                }
                2
            }
        };
        for (i, o) in obstacles.iter().enumerate() {
            o.validate()
                .map_err(|e| Error::InvalidScene(format!("obstacle {i}: {e}")))?;
            if o.dim() != workspace_dim {
                return Err(Error::InvalidScene(format!(
                    "obstacle {i} has dimension {}, expected {workspace_dim}",
                    o.dim()
                )));
            }
        }
        Ok(Scene {
            space,
            robot,
            obstacles,
            delta,
            query_regions: None,
        })
    }

    /// Scene with the default resolution of 1% of the space diagonal.
    pub fn with_default_resolution(
        space: ConfigSpace,
        robot: RobotModel,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self> {
        let delta = DEFAULT_RESOLUTION_FRACTION * space.diagonal();
        Scene::new(space, robot, obstacles, delta)
    }

    pub fn with_query_regions(mut self, regions: QueryRegions) -> Result<Self> {
        for r in [&regions.start, &regions.goal] {
            check_dim(self.dim(), r.lower.len())?;
            check_dim(self.dim(), r.upper.len())?;
            if r.lower.iter().zip(&r.upper).any(|(a, b)| !(a <= b)) {
                return Err(Error::InvalidScene(
                    "query region corners are not ordered".into(),
                ));
            }
        }
        self.query_regions = Some(regions);
        Ok(self)
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn robot(&self) -> &RobotModel {
        &self.robot
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn query_regions(&self) -> Option<&QueryRegions> {
        self.query_regions.as_ref()
    }

    /// Work units charged for one state check.
    pub fn state_check_cost(&self) -> u64 {
        4 + self.obstacles.len() as u64 * self.robot.obstacle_test_cost()
    }

    pub fn is_state_valid(&self, q: &[f64]) -> Result<bool> {
        check_dim(self.dim(), q.len())?;
        Ok(self.state_valid(q))
    }

    pub fn is_motion_valid(&self, a: &[f64], b: &[f64]) -> Result<bool> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())?;
        Ok(self.motion_valid(a, b).0)
    }

    /// Validates every leg of a polyline.
    pub fn is_segment_valid(&self, waypoints: &[Vec<f64>]) -> Result<bool> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(
                "a segment needs at least 2 waypoints".into(),
            ));
        }
        for w in waypoints {
            check_dim(self.dim(), w.len())?;
        }
        Ok(self.segment_valid(waypoints).0)
    }

    pub(crate) fn state_valid(&self, q: &[f64]) -> bool {
        if !self.space.contains(q) {
            return false;
        }
        match &self.robot {
            RobotModel::PointRobot => !self.obstacles.iter().any(|o| o.contains(q)),
            RobotModel::PlanarArm { link_lengths, base } => {
                let pts = RobotModel::arm_points(link_lengths, *base, q);
                !pts.windows(2).any(|seg| {
                    self.obstacles
                        .iter()
                        .any(|o| o.intersects_segment_2d(seg[0], seg[1]))
                })
            }
        }
    }

    /// Number of intervals used to validate a motion of length `len`: the
    /// smallest power of two giving a spacing of at most `delta`. Nested grids
    /// make a finer resolution check a superset of every coarser one.
    pub fn motion_intervals(&self, len: f64) -> u64 {
        let mut n: u64 = 1;
        while len / (n as f64) > self.delta && n < (1 << 40) {
            n <<= 1;
        }
        n
    }

    /// Validates the straight motion `a`-`b`. Returns the verdict and the
    /// number of states examined.
    pub(crate) fn motion_valid(&self, a: &[f64], b: &[f64]) -> (bool, u64) {
        let n = self.motion_intervals(euclidean(a, b));
        let mut buf = vec![0.0; a.len()];
        let mut checked = 0u64;
        let mut check = |i: u64, buf: &mut Vec<f64>| {
            checked += 1;
            interpolate_into(a, b, i, n, buf);
            self.state_valid(buf)
        };
        if !check(0, &mut buf) || !check(n, &mut buf) {
            return (false, checked);
        }
        // Coarse-to-fine order finds collisions early.
        let mut step = n / 2;
        while step > 0 {
            let mut i = step;
            while i < n {
                if !check(i, &mut buf) {
                    return (false, checked);
                }
                i += 2 * step;
            }
            step /= 2;
        }
        (true, checked)
    }

    pub(crate) fn segment_valid(&self, waypoints: &[Vec<f64>]) -> (bool, u64) {
        let mut total = 0;
        for w in waypoints.windows(2) {
            let (ok, c) = self.motion_valid(&w[0], &w[1]);
            total += c;
            if !ok {
                return (false, total);
            }
        }
        (true, total)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Scene> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scene::from_json(&text)
    }
}

/// Grid point `i` of `n` on the segment `a`-`b`, computed so that the
/// reversed motion produces bit-identical points.
#[inline]
fn interpolate_into(a: &[f64], b: &[f64], i: u64, n: u64, out: &mut [f64]) {
    if 2 * i < n {
        let t = i as f64 / n as f64;
        for k in 0..a.len() {
            out[k] = a[k] + (b[k] - a[k]) * t;
        }
    } else if 2 * i > n {
        let t = (n - i) as f64 / n as f64;
        for k in 0..a.len() {
            out[k] = b[k] + (a[k] - b[k]) * t;
        }
    } else {
        for k in 0..a.len() {
            out[k] = 0.5 * (a[k] + b[k]);
        }
    }
}
