//! Temporal lens statistics: unfolding delay, instability and rotation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FrameGeometry, Point};
use crate::ingest::FPS;

pub const DEFAULT_SMOOTH_WINDOW: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no orientation sample at or after frame {0}")]
    NoOrientationAfterUnfold(u64),
    #[error("smoothing window must be odd and positive, got {0}")]
    InvalidWindow(usize),
}

/// Centred mean filter. Positions where the full window does not fit keep
/// their raw value.
pub fn smooth_area(values: &[f64], window: usize) -> Result<Vec<f64>, KinematicsError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(KinematicsError::InvalidWindow(window));
    }
    let half = window / 2;
    let n = values.len();
    let mut out = values.to_vec();
    if n >= window {
        for (i, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
            *slot = values[i - half..=i + half].iter().sum::<f64>() / window as f64;
        }
    }
    Ok(out)
}

/// Index of the first maximum of the smoothed area series.
pub fn unfolding_time(smoothed: &[f64]) -> Result<usize, KinematicsError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in smoothed.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(KinematicsError::EmptySeries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstabilityMode {
    /// Sum of absolute changes of the lens-to-pupil distance.
    #[default]
    Literal,
    /// Sum of lens-to-pupil displacement vector lengths.
    Displacement,
}

impl fmt::Display for InstabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstabilityMode::Literal => f.write_str("literal"),
            InstabilityMode::Displacement => f.write_str("displacement"),
        }
    }
}

fn step(a: Point, b: Point, mode: InstabilityMode) -> f64 {
    match mode {
        InstabilityMode::Literal => (b.norm() - a.norm()).abs(),
        InstabilityMode::Displacement => (b - a).norm(),
    }
}

/// Accumulated movement of the lens relative to the pupil over
/// consecutive samples.
pub fn instability(rel_positions: &[Point], mode: InstabilityMode) -> Result<f64, KinematicsError> {
    if rel_positions.len() < 2 {
        return Err(KinematicsError::TooFewSamples(rel_positions.len()));
    }
    Ok(rel_positions.windows(2).map(|w| step(w[0], w[1], mode)).sum())
}

/// Like [`instability`], but only pairs of adjacent frame indices
/// contribute; differences across a missing frame are skipped.
pub fn track_instability(samples: &[(u64, Point)], mode: InstabilityMode) -> Result<f64, KinematicsError> {
    if samples.len() < 2 {
        return Err(KinematicsError::TooFewSamples(samples.len()));
    }
    Ok(samples
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| step(w[0].1, w[1].1, mode))
        .sum())
}

/// Smallest difference between two lens axes in degrees, `[0, 90]`.
/// Axes are undirected, so angles are compared modulo 180.
pub fn angular_diff(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).abs().rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Sum of axis changes between consecutive orientation samples whose
/// frame is at or after `from_frame`. Missing frames are bridged.
pub fn rotation(orientations: &[(u64, f64)], from_frame: u64) -> Result<f64, KinematicsError> {
    let after: Vec<f64> = orientations
        .iter()
        .filter(|(f, _)| *f >= from_frame)
        .map(|&(_, a)| a)
        .collect();
    if after.is_empty() {
        return Err(KinematicsError::NoOrientationAfterUnfold(from_frame));
    }
    Ok(after.windows(2).map(|w| angular_diff(w[1], w[0])).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub t_u_frames: u64,
    pub t_u_seconds: f64,
    pub instability_px: f64,
    pub rotation_deg: f64,
    pub n_frames: u64,
    pub coverage: f64,
    pub instability_mode: InstabilityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub smooth_window: usize,
    pub instability_mode: InstabilityMode,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            smooth_window: DEFAULT_SMOOTH_WINDOW,
            instability_mode: InstabilityMode::Literal,
        }
    }
}

/// Assembles the per-video statistics.
///
/// `track` holds the post-implantation frames starting at `start_frame`;
/// `orientations` are `(frame, angle)` pairs in frame order. Smoothing runs
/// over track samples in order. Unfolding delay is reported as a frame
/// offset from `start_frame`.
pub fn compute_report(
    track: &[FrameGeometry],
    orientations: &[(u64, f64)],
    start_frame: u64,
    options: &ReportOptions,
) -> Result<VideoReport, KinematicsError> {
    let first = track.first().ok_or(KinematicsError::EmptySeries)?;
    let last = track.last().expect("non-empty").frame_index;
    debug_assert!(first.frame_index >= start_frame);
    let areas: Vec<f64> = track.iter().map(|g| g.lens_area).collect();
    let smoothed = smooth_area(&areas, options.smooth_window)?;
    let unfold_idx = unfolding_time(&smoothed)?;
    let unfold_frame = track[unfold_idx].frame_index;
    let t_u_frames = unfold_frame - start_frame;

    let rel: Vec<(u64, Point)> = track.iter().map(|g| (g.frame_index, g.rel_pos)).collect();
    let instability_px = track_instability(&rel, options.instability_mode)?;
    let rotation_deg = rotation(orientations, unfold_frame)?;

    let span = last - unfold_frame + 1;
    let valid = orientations
        .iter()
        .filter(|(f, _)| (unfold_frame..=last).contains(f))
        .count();
    Ok(VideoReport {
        t_u_frames,
        t_u_seconds: t_u_frames as f64 / FPS,
        instability_px,
        rotation_deg,
        n_frames: last - start_frame + 1,
        coverage: valid as f64 / span as f64,
        instability_mode: options.instability_mode,
    })
}
