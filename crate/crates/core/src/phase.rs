//! Clip-level implantation-phase labelling from per-frame probabilities.
//!
//! A video is cut into consecutive three-second clips of 75 frames. Each
//! clip is split into five 15-frame subsequences, one key frame is taken
//! from each, and the five probabilities are averaged into a clip score.
//! The last clip of the implantation run marks where kinematics begin.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PhaseProbSeries;

pub const CLIP_LEN_FRAMES: u64 = 75;
pub const SUBSEQUENCES_PER_CLIP: usize = 5;
pub const SUBSEQUENCE_LEN: u64 = CLIP_LEN_FRAMES / SUBSEQUENCES_PER_CLIP as u64;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    #[error("clip starting at frame {start} needs {CLIP_LEN_FRAMES} frames, only {available} remain")]
    ClipTruncated { start: u64, available: u64 },
    #[error("expected {SUBSEQUENCES_PER_CLIP} probabilities, got {0}")]
    Arity(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("phase series does not cover a full clip")]
    EmptySeries,
    #[error("no probability available in frames {start}..{end}")]
    MissingFrames { start: u64, end: u64 },
    #[error("no clip was labelled as implantation")]
    NoImplantationDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// One frame drawn uniformly at random from each subsequence.
    Stochastic,
    /// The centre frame of each subsequence.
    Uniform,
}

/// Picks one key frame per 15-frame subsequence of the clip starting at
/// `clip_start`. `total_frames` is the number of frames in the video.
pub fn sample_clip_frames<R: Rng + ?Sized>(
    clip_start: u64,
    total_frames: u64,
    mode: Sampling,
    rng: &mut R,
) -> Result<[u64; SUBSEQUENCES_PER_CLIP], PhaseError> {
    let available = total_frames.saturating_sub(clip_start);
    if available < CLIP_LEN_FRAMES {
        return Err(PhaseError::ClipTruncated {
            start: clip_start,
            available,
        });
    }
    let mut frames = uniform_clip_frames(clip_start);
    if mode == Sampling::Stochastic {
        for (k, slot) in frames.iter_mut().enumerate() {
            *slot = clip_start + k as u64 * SUBSEQUENCE_LEN + rng.random_range(0..SUBSEQUENCE_LEN);
        }
    }
    Ok(frames)
}

fn uniform_clip_frames(clip_start: u64) -> [u64; SUBSEQUENCES_PER_CLIP] {
    std::array::from_fn(|k| clip_start + k as u64 * SUBSEQUENCE_LEN + SUBSEQUENCE_LEN / 2)
}

pub fn aggregate_clip_probability(probs: &[f64]) -> Result<f64, PhaseError> {
    if probs.len() != SUBSEQUENCES_PER_CLIP {
        return Err(PhaseError::Arity(probs.len()));
    }
    if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(PhaseError::InvalidProbability(bad));
    }
    // Summing in sorted order makes the mean independent of sample order.
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted.iter().sum::<f64>() / SUBSEQUENCES_PER_CLIP as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipLabeling {
    pub clip_len_frames: u64,
    pub clip_probs: Vec<f64>,
    pub labels: Vec<bool>,
    pub threshold: f64,
}

/// Labels every full clip of the series using uniform key-frame sampling.
///
/// A sampled frame absent from the series falls back to the mean of the
/// probabilities present in its subsequence; a subsequence with none is an
/// error. A trailing partial clip is dropped.
pub fn classify_clips(series: &PhaseProbSeries, threshold: f64) -> Result<ClipLabeling, PhaseError> {
    let total = series.frame_count();
    let n_clips = total / CLIP_LEN_FRAMES;
    if n_clips == 0 {
        return Err(PhaseError::EmptySeries);
    }
    let lookup = |frame: u64| -> Option<f64> {
        series
            .entries
            .binary_search_by_key(&frame, |&(f, _)| f)
            .ok()
            .map(|i| series.entries[i].1)
    };
    let mut clip_probs = Vec::with_capacity(n_clips as usize);
    for clip in 0..n_clips {
        let start = clip * CLIP_LEN_FRAMES;
        let frames = uniform_clip_frames(start);
        let mut probs = [0.0; SUBSEQUENCES_PER_CLIP];
        for (k, (&frame, slot)) in frames.iter().zip(probs.iter_mut()).enumerate() {
            *slot = match lookup(frame) {
                Some(p) => p,
                None => {
                    let sub_start = start + k as u64 * SUBSEQUENCE_LEN;
                    let sub_end = sub_start + SUBSEQUENCE_LEN;
                    let lo = series.entries.partition_point(|&(f, _)| f < sub_start);
                    let hi = series.entries.partition_point(|&(f, _)| f < sub_end);
                    if lo == hi {
                        return Err(PhaseError::MissingFrames {
                            start: sub_start,
                            end: sub_end,
                        });
                    }
                    series.entries[lo..hi].iter().map(|&(_, p)| p).sum::<f64>() / (hi - lo) as f64
                }
            };
        }
        clip_probs.push(aggregate_clip_probability(&probs)?);
    }
    let labels = clip_probs.iter().map(|&p| p >= threshold).collect();
    Ok(ClipLabeling {
        clip_len_frames: CLIP_LEN_FRAMES,
        clip_probs,
        labels,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplantationInterval {
    pub first_clip: u64,
    pub last_clip: u64,
    pub post_implantation_start_frame: u64,
}

/// The longest run of positive clips; the earliest wins a tie.
pub fn locate_implantation_interval(labels: &[bool]) -> Result<ImplantationInterval, PhaseError> {
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (i, &positive) in labels.iter().chain(std::iter::once(&false)).enumerate() {
        match (positive, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let longer = best.is_none_or(|(bs, be)| i - s > be - bs + 1);
                if longer {
                    best = Some((s, i - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let (first, last) = best.ok_or(PhaseError::NoImplantationDetected)?;
    Ok(ImplantationInterval {
        first_clip: first as u64,
        last_clip: last as u64,
        post_implantation_start_frame: (last as u64 + 1) * CLIP_LEN_FRAMES,
    })
}

/// Clip-level agreement of predicted labels against reference labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClipAgreement {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn clip_agreement(predicted: &[bool], reference: &[bool]) -> ClipAgreement {
    let n = predicted.len().min(reference.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &r) in predicted.iter().zip(reference).take(n) {
        match (p, r) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClipAgreement {
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, n),
    }
}
