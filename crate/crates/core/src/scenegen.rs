//! Randomized scene templates, solvable query generation and experience
//! datasets.
//!
//! Every generator is a pure function of its seed. Queries are verified by
//! solving them with RRT-Connect; the verification solution doubles as the
//! stored experience and as the criterion cost of the problem.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{rrt_connect, BaselineConfig};
use crate::clock::Budget;
use crate::cspace::{euclidean, ConfigSpace, Obstacle, QueryRegions, Region, RobotModel, Scene};
use crate::error::{Error, Result};
use crate::experience::{ExperienceMeta, ExperiencePath, LibraryEntry, PathLibrary};
use crate::planner::{PlanResult, Query};

/// Derives an independent 64-bit seed for `stream` from `base` (SplitMix64
/// finalizer over the combined input).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// A few scattered boxes; mostly open space.
    OpenBox,
    /// A wall across axis 0 pierced by one small square hole.
    GapWall,
    /// Boxes and spheres on a jittered grid.
    ClutterGrid,
    /// 2-D cage around the goal with one narrow opening.
    Cage2D,
    /// Planar arm reaching around a shelf.
    ArmShelf,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::OpenBox,
        TemplateKind::GapWall,
        TemplateKind::ClutterGrid,
        TemplateKind::Cage2D,
        TemplateKind::ArmShelf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::OpenBox => "open_box",
            TemplateKind::GapWall => "gap_wall",
            TemplateKind::ClutterGrid => "clutter_grid",
            TemplateKind::Cage2D => "cage2d",
            TemplateKind::ArmShelf => "arm_shelf",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown template '{s}'")))
    }
}

/// Parameters of a scene family. Positions are drawn within the declared
/// ranges; everything else is fixed per template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub kind: TemplateKind,
    pub dim: usize,
    /// Range of the passage width (gap hole, cage opening).
    pub gap_width: (f64, f64),
    /// Range of the passage centre along each free axis.
    pub gap_center: (f64, f64),
    /// Range of the wall (or cage, or shelf) position offset.
    pub offset: (f64, f64),
    /// Thickness of walls.
    pub thickness: f64,
    /// Obstacle count for clutter-style templates; ring count for the cage.
    pub count: usize,
    /// Half-extent of the query regions across the passage axes (for the
    /// cage: half-size of the innermost free square).
    pub spread: f64,
    /// Free width between nested walls.
    pub channel: f64,
    /// Offset of consecutive holes along axis 1 when there are several walls.
    pub stagger: f64,
    /// Offset of the query regions along axis 1 from the passage centre line.
    pub detour: f64,
    /// Validity resolution as a fraction of the space diagonal.
    pub resolution: f64,
}

impl SceneTemplate {
    pub fn new(kind: TemplateKind) -> Self {
        let base = SceneTemplate {
            kind,
            dim: 2,
            gap_width: (0.04, 0.06),
            gap_center: (0.3, 0.7),
            offset: (-0.05, 0.05),
            thickness: 0.1,
            count: 4,
            spread: 0.1,
            channel: 0.05,
            stagger: 0.15,
            detour: 0.0,
            resolution: 0.01,
        };
        match kind {
            TemplateKind::OpenBox => base,
            TemplateKind::GapWall => SceneTemplate {
                dim: 6,
                gap_width: (0.16, 0.18),
                gap_center: (0.48, 0.52),
                offset: (-0.02, 0.02),
                thickness: 0.25,
                count: 1,
                spread: 0.05,
                detour: 0.3,
                ..base
            },
            TemplateKind::ClutterGrid => SceneTemplate { count: 30, ..base },
            TemplateKind::Cage2D => SceneTemplate {
                gap_width: (0.04, 0.045),
                gap_center: (-0.1, 0.1),
                offset: (-0.01, 0.01),
                thickness: 0.02,
                count: 4,
                spread: 0.015,
                channel: 0.045,
                ..base
            },
            TemplateKind::ArmShelf => SceneTemplate {
                dim: 3,
                gap_width: (0.18, 0.22),
                thickness: 0.04,
                resolution: 0.004,
                ..base
            },
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    fn validate(&self) -> Result<()> {
        let fixed_2d = matches!(self.kind, TemplateKind::ClutterGrid | TemplateKind::Cage2D);
        if self.dim < 2 || (fixed_2d && self.dim != 2) {
            return Err(Error::InvalidConfig(format!(
                "template {} does not support dimension {}",
                self.kind, self.dim
            )));
        }
        if !(self.gap_width.0 > 0.0 && self.gap_width.0 <= self.gap_width.1) {
            return Err(Error::InvalidConfig(
                "gap width range is not ordered".into(),
            ));
        }
        Ok(())
    }

    fn space(&self) -> Result<ConfigSpace> {
        match self.kind {
            TemplateKind::ArmShelf => {
                ConfigSpace::cube(self.dim, -std::f64::consts::PI, std::f64::consts::PI)
            }
            _ => ConfigSpace::cube(self.dim, 0.0, 1.0),
        }
    }

    /// Resolution of the generated scenes.
    pub fn delta(&self) -> Result<f64> {
        Ok(self.resolution * self.space()?.diagonal())
    }
}

fn uniform<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.gen_range(range.0..range.1)
    } else {
        range.0
    }
}

fn aabb(min: Vec<f64>, max: Vec<f64>) -> Obstacle {
    Obstacle::AxisBox { min, max }
}

/// Slab `[x0, x1]` across axis 0 with the open cube hole `centre ± w/2`
/// over the remaining axes, written as `2 (d - 1)` boxes.
fn pierced_slab(dim: usize, x0: f64, x1: f64, centre: &[f64], w: f64) -> Vec<Obstacle> {
    let (lo, hi) = (-0.1, 1.1);
    let mut out = Vec::new();
    for j in 1..dim {
        for below in [true, false] {
            let mut min = vec![lo; dim];
            let mut max = vec![hi; dim];
            min[0] = x0;
            max[0] = x1;
            for k in 1..j {
                min[k] = centre[k] - w / 2.0;
                max[k] = centre[k] + w / 2.0;
            }
            if below {
                max[j] = centre[j] - w / 2.0;
            } else {
                min[j] = centre[j] + w / 2.0;
            }
            out.push(aabb(min, max));
        }
    }
    out
}

/// Half-size of the free square at the centre of the cage.
const CAGE_CORE: f64 = 0.06;

/// Builds the scene for `(template, seed)`.
pub fn generate_scene(template: &SceneTemplate, seed: u64) -> Result<Scene> {
    template.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, template.kind as u64));
    let space = template.space()?;
    let dim = template.dim;
    let delta = template.delta()?;
    let full = |lo: f64, hi: f64| Region {
        lower: vec![lo; dim],
        upper: vec![hi; dim],
    };

    match template.kind {
        TemplateKind::OpenBox => {
            let obstacles = (0..template.count)
                .map(|_| {
                    let mut min = Vec::with_capacity(dim);
                    let mut max = Vec::with_capacity(dim);
                    for _ in 0..dim {
                        let size = rng.gen_range(0.08..0.16);
                        let c = rng.gen_range(0.2..0.8);
                        min.push(c - size / 2.0);
                        max.push(c + size / 2.0);
                    }
                    aabb(min, max)
                })
                .collect();
            Scene::new(space, RobotModel::PointRobot, obstacles, delta)
        }
        TemplateKind::GapWall => {
            // `count` walls across axis 0; holes alternate around the centre
            // along axis 1
            let walls = template.count.max(1);
            let pitch = template.thickness + template.channel;
            let span = template.thickness + pitch * (walls - 1) as f64;
            let first = 0.5 - span / 2.0 + uniform(&mut rng, template.offset);
            let mut obstacles = Vec::new();
            for k in 0..walls {
                let x0 = first + k as f64 * pitch;
                let w = uniform(&mut rng, template.gap_width);
                let mut centre = vec![0.0; dim];
                for c in centre.iter_mut().skip(1) {
                    *c = uniform(&mut rng, template.gap_center);
                }
                if walls > 1 {
                    centre[1] += if k % 2 == 0 {
                        -template.stagger
                    } else {
                        template.stagger
                    };
                }
                obstacles.extend(pierced_slab(dim, x0, x0 + template.thickness, &centre, w));
            }
            let mid = 0.5 * (template.gap_center.0 + template.gap_center.1);
            let region = |lo: f64, hi: f64| {
                let mut r = full(mid - template.spread, mid + template.spread);
                r.lower[0] = lo;
                r.upper[0] = hi;
                r.lower[1] -= template.detour;
                r.upper[1] -= template.detour;
                r
            };
            let start = region(0.02, first - 0.1);
            let goal = region(first + span + 0.1, 0.98);
            Scene::new(space, RobotModel::PointRobot, obstacles, delta)?
                .with_query_regions(QueryRegions { start, goal })
        }
        TemplateKind::ClutterGrid => {
            let side = (template.count as f64).sqrt().ceil().max(1.0) as usize;
            let pitch = 0.8 / side as f64;
            let mut cells: Vec<usize> = (0..side * side).collect();
            // partial Fisher-Yates to pick `count` distinct cells
            for i in 0..template.count.min(cells.len()) {
                let j = rng.gen_range(i..cells.len());
                cells.swap(i, j);
            }
            let obstacles = cells
                .into_iter()
                .take(template.count)
                .map(|cell| {
                    let (cx, cy) = ((cell % side) as f64, (cell / side) as f64);
                    let jitter = 0.15 * pitch;
                    let x = 0.1 + (cx + 0.5) * pitch + rng.gen_range(-jitter..jitter);
                    let y = 0.1 + (cy + 0.5) * pitch + rng.gen_range(-jitter..jitter);
                    let half = rng.gen_range(0.18..0.3) * pitch;
                    if rng.gen_bool(0.5) {
                        aabb(vec![x - half, y - half], vec![x + half, y + half])
                    } else {
                        Obstacle::Sphere {
                            center: vec![x, y],
                            radius: half,
                        }
                    }
                })
                .collect();
            Scene::new(space, RobotModel::PointRobot, obstacles, delta)
        }
        TemplateKind::Cage2D => {
            // nested square rings around the goal; openings alternate sides
            let cx = 0.65 + uniform(&mut rng, template.offset);
            let cy = 0.5 + uniform(&mut rng, template.offset);
            let t = template.thickness;
            let channel = template.channel;
            let mut obstacles = Vec::new();
            let mut inner = CAGE_CORE;
            for ring in 0..template.count {
                let w = uniform(&mut rng, template.gap_width);
                let along = uniform(&mut rng, template.gap_center);
                let (lo, hi) = (inner, inner + t);
                let (x0, x1, y0, y1) = (cx - hi, cx + hi, cy - hi, cy + hi);
                obstacles.push(aabb(vec![x0, y0], vec![x1, y0 + t]));
                obstacles.push(aabb(vec![x0, y1 - t], vec![x1, y1]));
                let (open_x, closed_x) = if ring % 2 == 0 {
                    (x1 - t, x0)
                } else {
                    (x0, x1 - t)
                };
                obstacles.push(aabb(vec![closed_x, y0], vec![closed_x + t, y1]));
                let oy = cy + along * lo;
                obstacles.push(aabb(vec![open_x, y0], vec![open_x + t, oy - w / 2.0]));
                obstacles.push(aabb(vec![open_x, oy + w / 2.0], vec![open_x + t, y1]));
                inner = hi + channel;
            }
            let g = template.spread.min(CAGE_CORE - 0.01);
            let goal = Region {
                lower: vec![cx - g, cy - g],
                upper: vec![cx + g, cy + g],
            };
            let sx = (cx - inner) / 2.0;
            let start = Region {
                lower: vec![sx - template.spread, cy - template.spread],
                upper: vec![sx + template.spread, cy + template.spread],
            };
            Scene::new(space, RobotModel::PointRobot, obstacles, delta)?
                .with_query_regions(QueryRegions { start, goal })
        }
        TemplateKind::ArmShelf => {
            let total = 1.0;
            let links: Vec<f64> = (0..dim)
                .map(|i| total * (dim - i) as f64 / (dim * (dim + 1) / 2) as f64)
                .collect();
            let robot = RobotModel::PlanarArm {
                link_lengths: links,
                base: [0.0, 0.0],
            };
            // shelf: back panel plus boards, opening towards the arm
            let x_front = 0.55 + uniform(&mut rng, template.offset);
            let x_back = x_front + 0.35;
            let t = template.thickness;
            let mut obstacles = vec![aabb(vec![x_back, -0.8], vec![x_back + t, 0.8])];
            let mut y = -0.8;
            while y < 0.8 {
                obstacles.push(aabb(vec![x_front, y], vec![x_back, y + t]));
                y += t + uniform(&mut rng, template.gap_width);
            }
            obstacles.push(aabb(vec![x_front, 0.8], vec![x_back + t, 0.8 + t]));
            // floor post behind the base
            obstacles.push(aabb(vec![-0.6, -0.05], vec![-0.5, 0.05]));
            Scene::new(space, robot, obstacles, delta)
        }
    }
}

/// Default RRT-Connect verification budget, in virtual seconds.
pub const DEFAULT_VERIFY_SECONDS: f64 = 30.0;

/// Minimum start-goal separation as a fraction of the space diagonal.
pub const MIN_SEPARATION: f64 = 0.3;
const QUERY_RETRIES: usize = 20;
const ENDPOINT_DRAWS: usize = 10_000;

/// A query together with the RRT-Connect solution that verified it.
#[derive(Clone, Debug)]
pub struct VerifiedQuery {
    pub query: Query,
    pub solution: PlanResult,
}

fn draw_endpoint<R: Rng>(scene: &Scene, region: Option<&Region>, rng: &mut R) -> Option<Vec<f64>> {
    (0..ENDPOINT_DRAWS)
        .map(|_| match region {
            Some(r) => r.sample(rng),
            None => scene.space().sample_uniform(rng),
        })
        .find(|q| scene.state_valid(q))
}

/// Samples valid, well separated endpoints and verifies that RRT-Connect
/// solves them within `verify`; retries with fresh draws up to a cap.
pub fn generate_query(
    scene: &Scene,
    scene_id: &str,
    seed: u64,
    verify: Budget,
) -> Result<VerifiedQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = MIN_SEPARATION * scene.space().diagonal();
    let regions = scene.query_regions();
    let fail = |reason: String| Error::Generation {
        scene: scene_id.to_string(),
        reason,
    };
    for attempt in 0..QUERY_RETRIES {
        let start = draw_endpoint(scene, regions.map(|r| &r.start), &mut rng)
            .ok_or_else(|| fail("no valid start configuration found".into()))?;
        let Some(goal) = (0..ENDPOINT_DRAWS)
            .filter_map(|_| draw_endpoint(scene, regions.map(|r| &r.goal), &mut rng))
            .find(|g| euclidean(&start, g) >= min_sep)
        else {
            continue;
        };
        let query = Query::new(start, goal);
        let cfg = BaselineConfig {
            budget: verify,
            seed: derive_seed(seed, attempt as u64 + 1),
            ..BaselineConfig::default()
        };
        let solution = rrt_connect(&query, scene, &cfg)?;
        if solution.is_solved() {
            return Ok(VerifiedQuery { query, solution });
        }
    }
    Err(fail(format!(
        "no query verified feasible after {QUERY_RETRIES} attempts"
    )))
}

/// One benchmark problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub template: TemplateKind,
    pub scene: Scene,
    pub query: Query,
    pub seed: u64,
    /// Cost of the RRT-Connect solution used to verify the problem.
    pub criterion_cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemSet {
    pub problems: Vec<Problem>,
}

impl ProblemSet {
    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    /// Writes one problem per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(fs::File::create(path).map_err(io_err)?);
        for p in &self.problems {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<ProblemSet> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut problems = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            problems.push(
                serde_json::from_str(&line).map_err(|e| Error::LibraryEntry {
                    index: problems.len(),
                    reason: e.to_string(),
                })?,
            );
        }
        Ok(ProblemSet { problems })
    }
}

/// Generates one verified problem for `(template, seed)`.
pub fn generate_problem(
    template: &SceneTemplate,
    seed: u64,
    verify: Budget,
) -> Result<(Problem, VerifiedQuery)> {
    let scene = generate_scene(template, seed)?;
    let id = format!("{}-{seed}", template.kind);
    let vq = generate_query(&scene, &id, derive_seed(seed, 0xC0FFEE), verify)?;
    let problem = Problem {
        id,
        template: template.kind,
        scene,
        query: vq.query.clone(),
        seed,
        criterion_cost: vq.solution.cost().expect("verified query is solved"),
    };
    Ok((problem, vq))
}

/// Generates `n` verified problems and stores their RRT-Connect solutions as
/// experiences, phased by normalized arc length.
pub fn build_dataset(
    template: &SceneTemplate,
    n: usize,
    seed: u64,
    verify: Budget,
) -> Result<(ProblemSet, PathLibrary)> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "dataset needs at least one problem".into(),
        ));
    }
    let problems = (0..n)
        .map(|i| generate_problem(template, dataset_seed(seed, i), verify))
        .collect::<Result<Vec<_>>>()?;
    assemble_dataset(problems)
}

/// Seed of problem `index` in the dataset seeded with `seed`.
pub fn dataset_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Collects generated problems into a problem set and a library of their
/// verification solutions, in the given order.
pub fn assemble_dataset(
    problems: Vec<(Problem, VerifiedQuery)>,
) -> Result<(ProblemSet, PathLibrary)> {
    let mut set = ProblemSet::default();
    let mut lib = PathLibrary::new();
    for (problem, vq) in problems {
        let path = ExperiencePath::from_waypoints(vq.solution.path().unwrap().to_vec())?;
        lib.push(LibraryEntry {
            path,
            meta: ExperienceMeta {
                scene_id: problem.id.clone(),
                seed: problem.seed,
                solver: "rrt_connect".into(),
                cost: problem.criterion_cost,
            },
        })?;
        set.problems.push(problem);
    }
    Ok((set, lib))
}
