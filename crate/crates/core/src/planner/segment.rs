//! Micro-experience generation: slicing the mapped experience by phase and
//! morphing the slice onto the tree.

use rand::Rng;

use super::tree::{MicroSegment, Orientation, PlannerState};
use crate::cspace::euclidean;
use crate::error::{check_dim, Error, Result};
use crate::experience::ExperiencePath;

/// Draws the end phase of an exploratory segment, uniformly over the grid
/// phases strictly ahead of `start` in the tree's direction of growth.
pub fn sample_segment_end<R: Rng + ?Sized>(
    start: usize,
    orientation: Orientation,
    m: usize,
    rng: &mut R,
) -> Result<usize> {
    match orientation {
        Orientation::FromStart if start < m => Ok(rng.gen_range(start + 1..=m)),
        Orientation::FromGoal if start > 0 && start <= m => Ok(rng.gen_range(0..start)),
        _ => Err(Error::EmptyPhaseSpan),
    }
}

/// Slice of a grid-sampled experience between two grid phases, in travel
/// order from `from` to `to`. Runs backwards when `to < from`.
pub fn extract_segment(
    experience: &ExperiencePath,
    from: usize,
    to: usize,
) -> Result<MicroSegment> {
    let m = experience.len() - 1;
    if from == to {
        return Err(Error::EmptyPhaseSpan);
    }
    if from > m || to > m {
        return Err(Error::InvalidConfig(format!(
            "phase index out of range 0..={m}"
        )));
    }
    let indices: Vec<usize> = if from < to {
        (from..=to).collect()
    } else {
        (to..=from).rev().collect()
    };
    let waypoints = indices
        .iter()
        .map(|&i| experience.waypoints()[i].clone())
        .collect();
    let phases = indices.iter().map(|&i| experience.phases()[i]).collect();
    Ok(MicroSegment::new(waypoints, phases, from, to))
}

/// Shifts every waypoint by `shift` and shears it by `rho * shear`, where
/// `rho` runs from 0 at the first waypoint's phase to 1 at the last one's.
pub fn morph_segment(segment: &MicroSegment, shear: &[f64], shift: &[f64]) -> Result<MicroSegment> {
    let dim = segment.first().len();
    check_dim(dim, shear.len())?;
    check_dim(dim, shift.len())?;
    let p0 = segment.phases[0];
    let span = segment.phases[segment.phases.len() - 1] - p0;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::EmptyPhaseSpan);
    }
    let waypoints: Vec<Vec<f64>> = segment
        .waypoints
        .iter()
        .zip(&segment.phases)
        .map(|(w, phase)| {
            let rho = (phase - p0) / span;
            w.iter()
                .zip(shift)
                .zip(shear)
                .map(|((x, b), l)| x + b + rho * l)
                .collect()
        })
        .collect();
    Ok(MicroSegment::new(
        waypoints,
        segment.phases.clone(),
        segment.start_phase,
        segment.end_phase,
    ))
}

/// Generates a micro-segment starting at `init`.
///
/// With a `target`, the experience slice between the two phases is morphed so
/// that it joins `init` to `target` exactly. Without one, the end phase is
/// sampled ahead of `init` and the shear is drawn per axis from
/// `U(-epsilon * L, epsilon * L)`, `L` being the slice's arc length.
///
/// `experience` must be sampled on the phase grid (`m + 1` waypoints).
pub fn generate_segment<R: Rng + ?Sized>(
    init: &PlannerState,
    target: Option<&PlannerState>,
    experience: &ExperiencePath,
    orientation: Orientation,
    epsilon: f64,
    rng: &mut R,
) -> Result<(MicroSegment, PlannerState)> {
    let m = experience.len() - 1;
    check_dim(experience.dim(), init.q.len())?;
    let end_phase = match target {
        Some(t) => {
            check_dim(experience.dim(), t.q.len())?;
            t.phase
        }
        None => sample_segment_end(init.phase, orientation, m, rng)?,
    };
    if init.phase == end_phase {
        return Err(Error::EmptyPhaseSpan);
    }
    if init.phase > m || end_phase > m {
        return Err(Error::InvalidConfig(format!(
            "phase index out of range 0..={m}"
        )));
    }
    let indices: Vec<usize> = if init.phase < end_phase {
        (init.phase..=end_phase).collect()
    } else {
        (end_phase..=init.phase).rev().collect()
    };
    let points = experience.waypoints();
    let phases: Vec<f64> = indices.iter().map(|&i| experience.phases()[i]).collect();
    let first = &points[indices[0]];
    let last = &points[indices[indices.len() - 1]];
    let shift: Vec<f64> = init.q.iter().zip(first).map(|(q, p)| q - p).collect();
    let shear: Vec<f64> = match target {
        Some(t) => {
            t.q.iter()
                .zip(last)
                .zip(&shift)
                .map(|((q, p), b)| q - (p + b))
                .collect()
        }
        None => {
            let bound = epsilon * polyline_length_by(points, &indices);
            (0..shift.len())
                .map(|_| {
                    if bound > 0.0 {
                        rng.gen_range(-bound..=bound)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    let p0 = phases[0];
    let span = phases[phases.len() - 1] - p0;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::EmptyPhaseSpan);
    }
    let mut waypoints: Vec<Vec<f64>> = indices
        .iter()
        .zip(&phases)
        .map(|(&i, phase)| {
            let rho = (phase - p0) / span;
            points[i]
                .iter()
                .zip(&shift)
                .zip(&shear)
                .map(|((x, b), l)| x + b + rho * l)
                .collect()
        })
        .collect();
    waypoints[0].copy_from_slice(&init.q);
    if let Some(t) = target {
        waypoints.last_mut().unwrap().copy_from_slice(&t.q);
    }
    let segment = MicroSegment::new(waypoints, phases, init.phase, end_phase);
    let end = PlannerState::new(segment.last().to_vec(), end_phase);
    Ok((segment, end))
}

fn polyline_length_by(points: &[Vec<f64>], indices: &[usize]) -> f64 {
    indices
        .windows(2)
        .map(|w| euclidean(&points[w[0]], &points[w[1]]))
        .sum()
}
