//! Validation metrics for segmentation, detection and orientation outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BBox, DetectionClass, DetectionRecord, MaskFrame};
use crate::kinematics::angular_diff;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("no ground truth to evaluate against")]
    NoGroundTruth,
    #[error("sample counts differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
}

/// Foreground runs as half-open ranges of linear pixel indices.
fn foreground_ranges(mask: &MaskFrame) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(mask.rle.len() / 2);
    let mut pos = 0u64;
    for (i, &run) in mask.rle.iter().enumerate() {
        let end = pos + run as u64;
        if i % 2 == 1 {
            out.push((pos, end));
        }
        pos = end;
    }
    out
}

/// Returns `(|A ∩ B|, |A|, |B|)`.
fn overlap_counts(a: &MaskFrame, b: &MaskFrame) -> Result<(u64, u64, u64), MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let (ra, rb) = (foreground_ranges(a), foreground_ranges(b));
    let (mut i, mut j, mut inter) = (0, 0, 0u64);
    while i < ra.len() && j < rb.len() {
        let lo = ra[i].0.max(rb[j].0);
        let hi = ra[i].1.min(rb[j].1);
        inter += hi.saturating_sub(lo);
        if ra[i].1 < rb[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok((inter, a.foreground_count(), b.foreground_count()))
}

/// Intersection over union; two empty masks score 1.
pub fn mask_iou(a: &MaskFrame, b: &MaskFrame) -> Result<f64, MetricsError> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    let union = na + nb - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Dice coefficient; two empty masks score 1.
pub fn mask_dice(a: &MaskFrame, b: &MaskFrame) -> Result<f64, MetricsError> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    Ok(if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    })
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Average precision of one class. Detections are matched greedily in
/// descending confidence to the best-overlapping ground truth of the same
/// frame; a ground truth matches at most once. The precision-recall curve
/// is integrated over all recall steps using the monotone precision
/// envelope.
pub fn average_precision_at_iou(
    dets: &[DetectionRecord],
    gts: &[DetectionRecord],
    iou_thresh: f64,
) -> Result<f64, MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut by_frame: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_frame.entry(g.frame_index).or_default().push(i);
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));

    let mut matched = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(dets.len());
    for &d in &order {
        let det = &dets[d];
        let best = by_frame.get(&det.frame_index).and_then(|cands| {
            cands
                .iter()
                .map(|&g| (g, box_iou(&det.bbox, &gts[g].bbox)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
        });
        let hit = match best {
            Some((g, iou)) if iou >= iou_thresh && !matched[g] => {
                matched[g] = true;
                true
            }
            _ => false,
        };
        hits.push(hit);
    }

    let n_gt = gts.len() as f64;
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (k, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAp {
    pub iou_threshold: f64,
    pub map: f64,
    pub per_class: BTreeMap<DetectionClass, f64>,
}

/// Mean of per-class AP over the classes that have ground truth.
pub fn map_at_iou(
    dets: &[DetectionRecord],
    gts: &[DetectionRecord],
    iou_thresh: f64,
) -> Result<MeanAp, MetricsError> {
    let mut per_class = BTreeMap::new();
    for class in [DetectionClass::Lens, DetectionClass::Hook] {
        let g: Vec<DetectionRecord> = gts.iter().filter(|r| r.class == class).cloned().collect();
        if g.is_empty() {
            continue;
        }
        let d: Vec<DetectionRecord> = dets.iter().filter(|r| r.class == class).cloned().collect();
        per_class.insert(class, average_precision_at_iou(&d, &g, iou_thresh)?);
    }
    if per_class.is_empty() {
        return Err(MetricsError::NoGroundTruth);
    }
    let map = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(MeanAp {
        iou_threshold: iou_thresh,
        map,
        per_class,
    })
}

/// Mean of the best k% errors for k = 75, 50, 25.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopKMeans {
    #[serde(rename = "75%")]
    pub p75: f64,
    #[serde(rename = "50%")]
    pub p50: f64,
    #[serde(rename = "25%")]
    pub p25: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationErrorSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub topk_means: TopKMeans,
}

fn best_fraction_mean(sorted: &[f64], percent: usize) -> f64 {
    let count = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[..count].iter().sum::<f64>() / count as f64
}

/// Axis errors (period 180 degrees) between aligned predictions and
/// references. `std` is the population standard deviation.
pub fn orientation_error_summary(
    pred_deg: &[f64],
    true_deg: &[f64],
) -> Result<OrientationErrorSummary, MetricsError> {
    if pred_deg.len() != true_deg.len() {
        return Err(MetricsError::LengthMismatch(pred_deg.len(), true_deg.len()));
    }
    if pred_deg.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut errors: Vec<f64> = pred_deg
        .iter()
        .zip(true_deg)
        .map(|(&p, &t)| angular_diff(p, t))
        .collect();
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(OrientationErrorSummary {
        n: errors.len(),
        mean,
        std: var.sqrt(),
        topk_means: TopKMeans {
            p75: best_fraction_mean(&errors, 75),
            p50: best_fraction_mean(&errors, 50),
            p25: best_fraction_mean(&errors, 25),
        },
    })
}
