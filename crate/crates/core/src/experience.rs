//! Experience paths and the path library.
//!
//! An experience is a previously solved path with a phase value in `[0, 1]`
//! attached to every waypoint. A library of experiences is searched for the
//! entry whose endpoints best match a new query, and the chosen entry is
//! affinely mapped so that its endpoints coincide with the query.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cspace::{euclidean, polyline_length};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath")]
pub struct ExperiencePath {
    phases: Vec<f64>,
    waypoints: Vec<Vec<f64>>,
}

impl ExperiencePath {
    /// Builds a path from explicit phases. Phases must start at 0, end at 1
    /// and increase strictly.
    pub fn new(waypoints: Vec<Vec<f64>>, phases: Vec<f64>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(
                "an experience needs at least 2 waypoints".into(),
            ));
        }
        check_dim(waypoints.len(), phases.len())?;
        let dim = waypoints[0].len();
        if dim == 0 {
            return Err(Error::InvalidPath("waypoints are empty".into()));
        }
        for w in &waypoints {
            check_dim(dim, w.len())?;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidPath("waypoint is not finite".into()));
            }
        }
        if phases[0] != 0.0 || *phases.last().unwrap() != 1.0 {
            return Err(Error::InvalidPath("phases must run from 0 to 1".into()));
        }
        if phases.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidPath("phases must increase strictly".into()));
        }
        Ok(ExperiencePath { phases, waypoints })
    }

    /// Builds a path whose phases are the normalized arc length. Repeated
    /// consecutive waypoints are dropped. A path of zero length keeps its two
    /// endpoints at phases 0 and 1.
    pub fn from_waypoints(waypoints: Vec<Vec<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(
                "an experience needs at least 2 waypoints".into(),
            ));
        }
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(waypoints.len());
        for w in waypoints.iter() {
            if pts.last().is_none_or(|p| euclidean(p, w) > 0.0) {
                pts.push(w.clone());
            }
        }
        if pts.len() < 2 {
            let first = waypoints[0].clone();
            let last = waypoints.last().unwrap().clone();
            return ExperiencePath::new(vec![first, last], vec![0.0, 1.0]);
        }
        let total = polyline_length(&pts);
        let mut phases = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        phases.push(0.0);
        for w in pts.windows(2).take(pts.len() - 2) {
            acc += euclidean(&w[0], &w[1]);
            phases.push(acc / total);
        }
        phases.push(1.0);
        ExperiencePath::new(pts, phases)
    }

    pub fn dim(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn waypoints(&self) -> &[Vec<f64>] {
        &self.waypoints
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    /// Configuration at `phase`, linearly interpolated between the
    /// neighbouring waypoints.
    pub fn at_phase(&self, phase: f64) -> Vec<f64> {
        let phase = phase.clamp(0.0, 1.0);
        let k = self.phases.partition_point(|p| *p <= phase);
        if k == 0 {
            return self.waypoints[0].clone();
        }
        if k >= self.phases.len() {
            return self.end().to_vec();
        }
        let (p0, p1) = (self.phases[k - 1], self.phases[k]);
        if phase == p0 {
            return self.waypoints[k - 1].clone();
        }
        let t = (phase - p0) / (p1 - p0);
        let (a, b) = (&self.waypoints[k - 1], &self.waypoints[k]);
        a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect()
    }
}

/// The `m + 1` phases `0, 1/m, ..., 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    m: usize,
}

impl PhaseGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidConfig(
                "phase grid needs at least one division".into(),
            ));
        }
        Ok(PhaseGrid { m })
    }

    pub fn divisions(&self) -> usize {
        self.m
    }

    pub fn value(&self, index: usize) -> f64 {
        if index >= self.m {
            1.0
        } else {
            index as f64 / self.m as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.value(i)).collect()
    }
}

/// Resamples `path` at the phases `i / m`. Interpolation is linear in phase,
/// which equals arc-length interpolation for arc-length phased paths.
/// Endpoints are copied exactly.
pub fn discretize_phases(path: &ExperiencePath, m: usize) -> Result<ExperiencePath> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 phase divisions, got {m}"
        )));
    }
    let grid = PhaseGrid::new(m)?;
    let phases = grid.values();
    let mut waypoints: Vec<Vec<f64>> = phases.iter().map(|p| path.at_phase(*p)).collect();
    waypoints[0] = path.start().to_vec();
    waypoints[m] = path.end().to_vec();
    ExperiencePath::new(waypoints, phases)
}

/// Maps `path` onto the query `start`-`goal`: each waypoint is shifted by
/// `start - path(0)` and sheared along its phase so the final waypoint lands
/// on `goal`.
pub fn map_experience(
    path: &ExperiencePath,
    start: &[f64],
    goal: &[f64],
) -> Result<ExperiencePath> {
    check_dim(path.dim(), start.len())?;
    check_dim(path.dim(), goal.len())?;
    let shift: Vec<f64> = start.iter().zip(path.start()).map(|(s, p)| s - p).collect();
    let shear: Vec<f64> = goal
        .iter()
        .zip(path.end())
        .zip(&shift)
        .map(|((g, e), b)| g - (e + b))
        .collect();
    let p0 = path.phases[0];
    let span = path.phases[path.len() - 1] - p0;
    let mut waypoints: Vec<Vec<f64>> = path
        .waypoints
        .iter()
        .zip(&path.phases)
        .map(|(w, phase)| {
            let rho = (phase - p0) / span;
            w.iter()
                .zip(&shift)
                .zip(&shear)
                .map(|((x, b), l)| x + b + rho * l)
                .collect()
        })
        .collect();
    // pin the endpoints against rounding
    waypoints[0] = start.to_vec();
    *waypoints.last_mut().unwrap() = goal.to_vec();
    Ok(ExperiencePath {
        phases: path.phases.clone(),
        waypoints,
    })
}

/// Provenance of a stored experience.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperienceMeta {
    pub scene_id: String,
    pub seed: u64,
    pub solver: String,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    #[serde(flatten)]
    pub path: ExperiencePath,
    pub meta: ExperienceMeta,
}

/// An ordered collection of experiences sharing one dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathLibrary {
    entries: Vec<LibraryEntry>,
}

impl PathLibrary {
    pub fn new() -> Self {
        PathLibrary::default()
    }

    pub fn from_entries(entries: Vec<LibraryEntry>) -> Result<Self> {
        let mut lib = PathLibrary::new();
        for e in entries {
            lib.push(e)?;
        }
        Ok(lib)
    }

    pub fn push(&mut self, entry: LibraryEntry) -> Result<()> {
        if let Some(dim) = self.dim() {
            if entry.path.dim() != dim {
                return Err(Error::LibraryEntry {
                    index: self.entries.len(),
                    reason: format!(
                        "dimension {} does not match library dimension {dim}",
                        entry.path.dim()
                    ),
                });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Dimension shared by all entries, `None` while the library is empty.
    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.path.dim())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&LibraryEntry> {
        self.entries.get(index)
    }

    /// Library holding only entry `index`.
    pub fn single(&self, index: usize) -> Option<PathLibrary> {
        self.entries.get(index).map(|e| PathLibrary {
            entries: vec![e.clone()],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<PathLibrary> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut lib = PathLibrary::new();
        let mut index = 0;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawEntry = serde_json::from_str(&line).map_err(|e| Error::LibraryEntry {
                index,
                reason: e.to_string(),
            })?;
            let path = ExperiencePath::new(raw.waypoints, raw.phases).map_err(|e| {
                Error::LibraryEntry {
                    index,
                    reason: e.to_string(),
                }
            })?;
            lib.push(LibraryEntry {
                path,
                meta: raw.meta,
            })?;
            index += 1;
        }
        Ok(lib)
    }
}

#[derive(Deserialize)]
struct RawPath {
    phases: Vec<f64>,
    waypoints: Vec<Vec<f64>>,
}

impl TryFrom<RawPath> for ExperiencePath {
    type Error = Error;

    fn try_from(raw: RawPath) -> Result<Self> {
        ExperiencePath::new(raw.waypoints, raw.phases)
    }
}

#[derive(Deserialize)]
struct RawEntry {
    phases: Vec<f64>,
    waypoints: Vec<Vec<f64>>,
    meta: ExperienceMeta,
}

pub fn save_library(lib: &PathLibrary, path: &Path) -> Result<()> {
    lib.save(path)
}

pub fn load_library(path: &Path) -> Result<PathLibrary> {
    PathLibrary::load(path)
}

/// Sum of start and goal distances between an experience and a query.
pub fn similarity(path: &ExperiencePath, start: &[f64], goal: &[f64]) -> f64 {
    euclidean(start, path.start()) + euclidean(goal, path.end())
}

/// Returns the index of the entry closest to the query; ties go to the lowest
/// index.
pub fn retrieve_index(lib: &PathLibrary, start: &[f64], goal: &[f64]) -> Result<usize> {
    let dim = lib.dim().ok_or(Error::EmptyLibrary)?;
    check_dim(dim, start.len())?;
    check_dim(dim, goal.len())?;
    let mut best = (0, f64::INFINITY);
    for (i, e) in lib.entries.iter().enumerate() {
        let d = similarity(&e.path, start, goal);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

pub fn retrieve<'a>(
    lib: &'a PathLibrary,
    start: &[f64],
    goal: &[f64],
) -> Result<&'a ExperiencePath> {
    retrieve_index(lib, start, goal).map(|i| &lib.entries[i].path)
}
