//! Seeded synthetic surgery videos with programmed lens kinematics.
//!
//! A video is a pupil disk and a lens ellipse that unfolds, drifts and
//! rotates after the implantation phase. The generator emits the three
//! interchange streams and the ground truth they were rendered from.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::ingest::{
    write_detection_stream, BBox, DetectionClass, DetectionRecord, MaskClass, MaskFrame,
    MaskSequence, MaskStream, PhaseProbSeries, RowSpan, FPS,
};
use crate::kinematics::{rotation, track_instability, InstabilityMode};
use crate::phase::CLIP_LEN_FRAMES;
use crate::pipeline::{BrandEntry, StudyManifest, VideoInputs};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec field `{field}`: {reason}")]
    SpecInvalid { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> SynthError {
    SynthError::SpecInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// ChaCha8 seeded from a `u64`, one independent stream per purpose.
/// Normals use the basic Box-Muller transform, one uniform pair per draw.
#[derive(Debug, Clone)]
pub struct SynthRng(ChaCha8Rng);

const STREAM_MASKS: u64 = 1;
const STREAM_DETECTIONS: u64 = 2;
const STREAM_PHASE: u64 = 3;
const STREAM_SPEC: u64 = 4;

impl SynthRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.random::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: u64, hi: u64) -> u64 {
        lo + (self.uniform() * (hi - lo + 1) as f64) as u64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PupilSpec {
    pub center: [f64; 2],
    pub radius: f64,
    /// `[frame_offset, dx, dy]` waypoints of whole-eye motion.
    #[serde(default)]
    pub motion: Vec<[f64; 3]>,
}

/// Lens scale over time. It rises on a logistic from `start_scale` to 1 at
/// `peak_offset` frames after implantation, then falls back symmetrically
/// until it settles at `settle_scale`. `peak_offset = 0` means the lens is
/// unfolded from the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfoldingCurve {
    pub start_scale: f64,
    pub midpoint: f64,
    pub steepness: f64,
    pub peak_offset: u64,
    pub settle_scale: f64,
}

impl UnfoldingCurve {
    pub fn unfolded() -> Self {
        Self {
            start_scale: 1.0,
            midpoint: 0.0,
            steepness: 1.0,
            peak_offset: 0,
            settle_scale: 1.0,
        }
    }

    fn logistic(&self, t: f64) -> f64 {
        1.0 / (1.0 + (-self.steepness * (t - self.midpoint)).exp())
    }

    fn rise(&self, tau: f64) -> f64 {
        let peak = self.peak_offset as f64;
        let (l0, lp) = (self.logistic(0.0), self.logistic(peak));
        let r = (self.logistic(tau.clamp(0.0, peak)) - l0) / (lp - l0);
        self.start_scale + (1.0 - self.start_scale) * r
    }

    /// Scale at `tau` frames after the post-implantation start.
    pub fn scale(&self, tau: f64) -> f64 {
        if self.peak_offset == 0 {
            return 1.0;
        }
        let peak = self.peak_offset as f64;
        if tau <= peak {
            self.rise(tau)
        } else {
            self.rise(2.0 * peak - tau).max(self.settle_scale)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSpec {
    /// Unfolded semi-axes `[major, minor]` in px.
    pub semi_axes: [f64; 2],
    pub unfolding: UnfoldingCurve,
    /// `[frame_offset, dx, dy]` waypoints of the lens centre relative to the
    /// pupil centre. Linear in between, constant outside.
    pub drift: Vec<[f64; 3]>,
    /// `[frame_offset, degrees]` waypoints of the major-axis angle.
    pub orientation: Vec<[f64; 2]>,
    /// Distance of each hook beyond the end of the major axis.
    pub hook_offset: f64,
}

/// A notch cut into the lens mask over a frame range. Its 40 degree mouth
/// faces `direction_deg` (relative to the major axis) and it removes
/// `fraction` of the lens area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionEvent {
    /// Inclusive `[first, last]` frame offsets.
    pub frames: [u64; 2],
    pub direction_deg: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutHook {
    First,
    Second,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HookDropout {
    pub frames: [u64; 2],
    pub hook: DropoutHook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionNoise {
    /// Standard deviation of a slowly varying offset of every box centre.
    pub center_jitter_px: f64,
    /// Range of the jitter period in frames.
    pub jitter_period_frames: [f64; 2],
    /// Range of true-detection confidences.
    pub confidence: [f64; 2],
    /// Per-frame probability of a duplicate hook box near a true hook, with
    /// lower confidence.
    pub spurious_rate: f64,
    pub dropouts: Vec<HookDropout>,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            center_jitter_px: 0.0,
            jitter_period_frames: [400.0, 800.0],
            confidence: [0.9, 0.9],
            spurious_rate: 0.0,
            dropouts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskNoise {
    /// Standard deviation of each row endpoint, rounded to whole pixels.
    pub boundary_jitter_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseNoise {
    pub positive_prob: f64,
    pub negative_prob: f64,
    pub sigma: f64,
    /// Isolated clips outside the implantation range labelled positive.
    pub false_positive_clips: Vec<u64>,
}

impl Default for PhaseNoise {
    fn default() -> Self {
        Self {
            positive_prob: 0.85,
            negative_prob: 0.1,
            sigma: 0.0,
            false_positive_clips: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_frames: u64,
    pub width: u32,
    pub height: u32,
    /// Inclusive `[first, last]` clips of the implantation phase.
    pub implantation_clip_range: [u64; 2],
    pub pupil: PupilSpec,
    pub lens: LensSpec,
    #[serde(default)]
    pub occlusions: Vec<OcclusionEvent>,
    #[serde(default)]
    pub detection_noise: DetectionNoise,
    #[serde(default)]
    pub mask_noise: MaskNoise,
    #[serde(default)]
    pub phase_noise: PhaseNoise,
}

pub const HOOK_BOX_PX: f64 = 12.0;
const NOTCH_HALF_ANGLE_DEG: f64 = 20.0;
const SPURIOUS_CONF_FLOOR: f64 = 0.61;

fn piecewise<const N: usize>(points: &[[f64; N]], t: f64) -> [f64; N] {
    let first = points[0];
    if t <= first[0] {
        return first;
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b[0] {
            let u = (t - a[0]) / (b[0] - a[0]);
            let mut out = a;
            for k in 1..N {
                out[k] = a[k] + u * (b[k] - a[k]);
            }
            out[0] = t;
            return out;
        }
    }
    *points.last().expect("non-empty")
}

fn check_waypoints<const N: usize>(points: &[[f64; N]], field: &str) -> Result<(), SynthError> {
    if points.is_empty() {
        return Err(invalid(field, "needs at least one waypoint"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "waypoints must be finite"));
    }
    if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(invalid(field, "waypoint frames must strictly increase"));
    }
    Ok(())
}

/// True lens pose at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensPose {
    pub pupil_center: Point,
    pub lens_center: Point,
    pub scale: f64,
    pub theta_deg: f64,
}

impl SynthSpec {
    pub fn start_frame(&self) -> u64 {
        (self.implantation_clip_range[1] + 1) * CLIP_LEN_FRAMES
    }

    fn insertion_frame(&self) -> u64 {
        self.implantation_clip_range[0] * CLIP_LEN_FRAMES
    }

    /// Pose at `tau` frames after the post-implantation start.
    pub fn pose(&self, tau: f64) -> LensPose {
        let eye = if self.pupil.motion.is_empty() {
            Point::new(0.0, 0.0)
        } else {
            let m = piecewise(&self.pupil.motion, tau);
            Point::new(m[1], m[2])
        };
        let pupil_center = Point::new(self.pupil.center[0], self.pupil.center[1]) + eye;
        let d = piecewise(&self.lens.drift, tau);
        LensPose {
            pupil_center,
            lens_center: pupil_center + Point::new(d[1], d[2]),
            scale: self.lens.unfolding.scale(tau),
            theta_deg: piecewise(&self.lens.orientation, tau)[1],
        }
    }

    fn hook_reach(&self, scale: f64) -> f64 {
        self.lens.semi_axes[0] * scale + self.lens.hook_offset
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("width", "frame dimensions must be positive"));
        }
        let [c0, c1] = self.implantation_clip_range;
        if c0 > c1 {
            return Err(invalid("implantation_clip_range", "first clip after last clip"));
        }
        let start = self.start_frame();
        if start >= self.n_frames {
            return Err(invalid("implantation_clip_range", "implantation ends after the video"));
        }
        let u = &self.lens.unfolding;
        if !(u.start_scale > 0.0 && u.start_scale <= 1.0) {
            return Err(invalid("lens.unfolding.start_scale", "must lie in (0, 1]"));
        }
        if u.peak_offset > 0 {
            if !(u.steepness > 0.0 && u.steepness.is_finite() && u.midpoint.is_finite()) {
                return Err(invalid("lens.unfolding.steepness", "must be positive"));
            }
            if u.start_scale >= 1.0 {
                return Err(invalid("lens.unfolding.start_scale", "must be below 1 when unfolding"));
            }
            let near_peak = u.rise(u.peak_offset.saturating_sub(8) as f64);
            if !(u.settle_scale > 0.0 && u.settle_scale < near_peak) {
                return Err(invalid(
                    "lens.unfolding.settle_scale",
                    format!("must lie in (0, {near_peak:.4}) so the peak stays sharp"),
                ));
            }
        }
        if start + u.peak_offset + 8 >= self.n_frames {
            return Err(invalid("lens.unfolding.peak_offset", "peak not reached before the video ends"));
        }
        let [a, b] = self.lens.semi_axes;
        if !(b > 0.0 && a >= b && a.is_finite()) {
            return Err(invalid("lens.semi_axes", "need major >= minor > 0"));
        }
        if self.lens.hook_offset.is_nan() || self.lens.hook_offset < 0.0 {
            return Err(invalid("lens.hook_offset", "must be non-negative"));
        }
        if self.pupil.radius.is_nan() || self.pupil.radius <= 0.0 {
            return Err(invalid("pupil.radius", "must be positive"));
        }
        check_waypoints(&self.lens.drift, "lens.drift")?;
        check_waypoints(&self.lens.orientation, "lens.orientation")?;
        if !self.pupil.motion.is_empty() {
            check_waypoints(&self.pupil.motion, "pupil.motion")?;
        }
        for w in self.lens.orientation.windows(2) {
            if (w[1][1] - w[0][1]).abs() > 45.0 * (w[1][0] - w[0][0]) {
                return Err(invalid("lens.orientation", "faster than 45 degrees per frame"));
            }
        }
        let post = self.n_frames - start;
        for ev in &self.occlusions {
            if ev.frames[0] > ev.frames[1] || ev.frames[1] >= post {
                return Err(invalid("occlusions.frames", "range outside the post-implantation video"));
            }
            if !(0.01..=0.2).contains(&ev.fraction) {
                return Err(invalid("occlusions.fraction", "must lie in [0.01, 0.2]"));
            }
        }
        let dn = &self.detection_noise;
        if dn.center_jitter_px.is_nan() || dn.center_jitter_px < 0.0 {
            return Err(invalid("detection_noise.center_jitter_px", "must be non-negative"));
        }
        let [p0, p1] = dn.jitter_period_frames;
        if !(p0 > 0.0 && p1 >= p0) {
            return Err(invalid("detection_noise.jitter_period_frames", "need 0 < min <= max"));
        }
        let [lo, hi] = dn.confidence;
        if !(lo > 0.6 && hi >= lo && hi <= 1.0) {
            return Err(invalid("detection_noise.confidence", "need 0.6 < min <= max <= 1"));
        }
        if !(0.0..=1.0).contains(&dn.spurious_rate) {
            return Err(invalid("detection_noise.spurious_rate", "must lie in [0, 1]"));
        }
        if dn.spurious_rate > 0.0 && lo <= SPURIOUS_CONF_FLOOR + 0.01 {
            return Err(invalid("detection_noise.confidence", "spurious hooks need min confidence above 0.62"));
        }
        for d in &dn.dropouts {
            if d.frames[0] > d.frames[1] || d.frames[1] >= post {
                return Err(invalid("detection_noise.dropouts", "range outside the post-implantation video"));
            }
        }
        if self.mask_noise.boundary_jitter_px.is_nan() || self.mask_noise.boundary_jitter_px < 0.0 {
            return Err(invalid("mask_noise.boundary_jitter_px", "must be non-negative"));
        }
        let pn = &self.phase_noise;
        if !(pn.sigma >= 0.0 && (0.0..=1.0).contains(&pn.positive_prob) && (0.0..=1.0).contains(&pn.negative_prob)) {
            return Err(invalid("phase_noise", "probabilities in [0, 1] and sigma >= 0 required"));
        }
        let mut fp = pn.false_positive_clips.clone();
        fp.sort_unstable();
        let run = c1 - c0 + 1;
        if fp.windows(2).any(|w| w[1] <= w[0] + 1)
            || fp.iter().any(|&c| c + 1 >= c0 && c <= c1 + 1)
            || (run < 2 && !fp.is_empty())
        {
            return Err(invalid(
                "phase_noise.false_positive_clips",
                "must be isolated clips away from a range of at least two clips",
            ));
        }
        self.check_bounds()
    }

    fn check_bounds(&self) -> Result<(), SynthError> {
        let (w, h) = (self.width as f64, self.height as f64);
        let inside = |p: Point, r: f64| p.x - r >= 0.0 && p.y - r >= 0.0 && p.x + r <= w - 1.0 && p.y + r <= h - 1.0;
        let mask_margin = 4.0 * self.mask_noise.boundary_jitter_px + 1.0;
        let det_margin = HOOK_BOX_PX / 2.0 + 4.0 * self.detection_noise.center_jitter_px + 1.0;
        let start = self.start_frame() as f64;
        for f in 0..self.n_frames {
            let tau = f as f64 - start;
            let pose = self.pose(tau);
            if !inside(pose.pupil_center, self.pupil.radius + mask_margin) {
                return Err(invalid("pupil", format!("pupil leaves the frame at frame {f}")));
            }
            let reach = self.hook_reach(pose.scale) + det_margin.max(mask_margin);
            if !inside(pose.lens_center, reach) {
                return Err(invalid("lens.drift", format!("lens leaves the frame at frame {f}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Rows of a filled, rotated ellipse. Pixel `(x, y)` is inside when its
/// centre is.
pub fn ellipse_spans(center: Point, a: f64, b: f64, theta_deg: f64, width: u32, height: u32) -> Vec<RowSpan> {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let (ia2, ib2) = (1.0 / (a * a), 1.0 / (b * b));
    let qa = c * c * ia2 + s * s * ib2;
    let half_h = (a * a * s * s + b * b * c * c).sqrt();
    let y0 = (center.y - half_h).ceil().max(0.0) as i64;
    let y1 = (center.y + half_h).floor().min(height as f64 - 1.0) as i64;
    let mut spans = Vec::new();
    for y in y0..=y1 {
        let dy = y as f64 - center.y;
        let qb = 2.0 * dy * c * s * (ia2 - ib2);
        let qc = dy * dy * (s * s * ia2 + c * c * ib2) - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let lo = center.x + (-qb - root) / (2.0 * qa);
        let hi = center.x + (-qb + root) / (2.0 * qa);
        let xs = lo.ceil().max(0.0);
        let xe = (hi.floor() + 1.0).min(width as f64);
        if xe > xs {
            spans.push(RowSpan {
                y: y as u32,
                x_start: xs as u32,
                x_end: xe as u32,
            });
        }
    }
    spans
}

/// Convex cone with apex `apex` spanned by the rays through `e1` and `e2`.
#[derive(Debug, Clone, Copy)]
struct Cone {
    apex: Point,
    d1: Point,
    d2: Point,
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

impl Cone {
    fn new(apex: Point, e1: Point, e2: Point) -> Self {
        let (d1, d2) = (e1 - apex, e2 - apex);
        if cross(d1, d2) >= 0.0 {
            Self { apex, d1, d2 }
        } else {
            Self { apex, d1: d2, d2: d1 }
        }
    }

    /// Real x-interval of row `y` inside the cone.
    fn row_interval(&self, y: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        // cross(d1, q - apex) >= 0 and cross(q - apex, d2) >= 0.
        for (dir, sign) in [(self.d1, 1.0), (self.d2, -1.0)] {
            let dy = y - self.apex.y;
            // sign * (dir.x * dy - dir.y * (x - apex.x)) >= 0
            let k = -sign * dir.y;
            let c0 = sign * (dir.x * dy + dir.y * self.apex.x);
            if k == 0.0 {
                if c0 < 0.0 {
                    return None;
                }
            } else if k > 0.0 {
                lo = lo.max(-c0 / k);
            } else {
                hi = hi.min(-c0 / k);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Apex distance (unit-disk frame) of a notch with the fixed mouth that
/// removes `fraction` of the disk.
fn notch_apex_distance(fraction: f64) -> f64 {
    let alpha = NOTCH_HALF_ANGLE_DEG.to_radians();
    let segment = alpha - alpha.sin() * alpha.cos();
    alpha.cos() - (fraction * std::f64::consts::PI - segment) / alpha.sin()
}

/// Notch cone for an ellipse, in image coordinates.
fn notch_cone(center: Point, a: f64, b: f64, theta_deg: f64, direction_deg: f64, fraction: f64) -> Cone {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let map = |u: f64, v: f64| {
        let (px, py) = (a * u, b * v);
        center + Point::new(px * c - py * s, px * s + py * c)
    };
    let phi = direction_deg.to_radians();
    let alpha = NOTCH_HALF_ANGLE_DEG.to_radians();
    let d = notch_apex_distance(fraction);
    Cone::new(
        map(d * phi.cos(), d * phi.sin()),
        map((phi - alpha).cos(), (phi - alpha).sin()),
        map((phi + alpha).cos(), (phi + alpha).sin()),
    )
}

fn subtract_cone(spans: &[RowSpan], cone: &Cone) -> Vec<RowSpan> {
    let mut out = Vec::with_capacity(spans.len() + 4);
    for &span in spans {
        let Some((lo, hi)) = cone.row_interval(span.y as f64) else {
            out.push(span);
            continue;
        };
        let cut_start = lo.ceil().max(span.x_start as f64);
        let cut_end = (hi.floor() + 1.0).min(span.x_end as f64);
        if cut_end <= cut_start {
            out.push(span);
            continue;
        }
        let (cs, ce) = (cut_start as u32, cut_end as u32);
        if cs > span.x_start {
            out.push(RowSpan { x_end: cs, ..span });
        }
        if ce < span.x_end {
            out.push(RowSpan { x_start: ce, ..span });
        }
    }
    out
}

/// Ellipse with an occlusion notch.
#[allow(clippy::too_many_arguments)]
pub fn notched_ellipse_spans(
    center: Point,
    a: f64,
    b: f64,
    theta_deg: f64,
    direction_deg: f64,
    fraction: f64,
    width: u32,
    height: u32,
) -> Vec<RowSpan> {
    let spans = ellipse_spans(center, a, b, theta_deg, width, height);
    subtract_cone(&spans, &notch_cone(center, a, b, theta_deg, direction_deg, fraction))
}

fn jitter_spans(spans: &mut [RowSpan], sigma: f64, width: u32, rng: &mut SynthRng) {
    if sigma == 0.0 {
        return;
    }
    let w = width as i64;
    for span in spans.iter_mut() {
        let xs = (span.x_start as i64 + (sigma * rng.normal()).round() as i64).clamp(0, w - 1);
        let xe = (span.x_end as i64 + (sigma * rng.normal()).round() as i64).clamp(1, w);
        let (xs, xe) = if xe > xs {
            (xs, xe)
        } else {
            let mid = (span.x_start as i64 + span.x_end as i64) / 2;
            (mid, mid + 1)
        };
        span.x_start = xs as u32;
        span.x_end = xe as u32;
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// True state at one post-implantation frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueFrame {
    pub frame: u64,
    pub lens_center: [f64; 2],
    pub pupil_center: [f64; 2],
    pub lens_area: f64,
    pub orientation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGroundTruth {
    pub start_frame: u64,
    pub unfold_frame: u64,
    /// Frames from the post-implantation start to the first true area peak.
    pub t_u_true_frames: u64,
    pub t_u_true_seconds: f64,
    pub ins_true_literal: f64,
    pub ins_true_displacement: f64,
    pub r_true_deg: f64,
    pub frames: Vec<TrueFrame>,
}

impl SynthGroundTruth {
    pub fn ins_true(&self, mode: InstabilityMode) -> f64 {
        match mode {
            InstabilityMode::Literal => self.ins_true_literal,
            InstabilityMode::Displacement => self.ins_true_displacement,
        }
    }
}

/// Ground truth of a spec, computed from the noiseless paths.
pub fn ground_truth(spec: &SynthSpec) -> Result<SynthGroundTruth, SynthError> {
    spec.validate()?;
    let start = spec.start_frame();
    let [a, b] = spec.lens.semi_axes;
    let frames: Vec<TrueFrame> = (start..spec.n_frames)
        .map(|f| {
            let pose = spec.pose((f - start) as f64);
            TrueFrame {
                frame: f,
                lens_center: [pose.lens_center.x, pose.lens_center.y],
                pupil_center: [pose.pupil_center.x, pose.pupil_center.y],
                lens_area: std::f64::consts::PI * a * b * pose.scale * pose.scale,
                orientation_deg: pose.theta_deg,
            }
        })
        .collect();
    let mut peak = 0;
    for (i, fr) in frames.iter().enumerate() {
        if fr.lens_area > frames[peak].lens_area {
            peak = i;
        }
    }
    let unfold_frame = frames[peak].frame;
    let rel: Vec<(u64, Point)> = frames
        .iter()
        .map(|fr| {
            let d = Point::new(fr.lens_center[0], fr.lens_center[1])
                - Point::new(fr.pupil_center[0], fr.pupil_center[1]);
            (fr.frame, d)
        })
        .collect();
    let orient: Vec<(u64, f64)> = frames.iter().map(|fr| (fr.frame, fr.orientation_deg)).collect();
    let kin = |e: crate::kinematics::KinematicsError| invalid("n_frames", e.to_string());
    let t_u = unfold_frame - start;
    Ok(SynthGroundTruth {
        start_frame: start,
        unfold_frame,
        t_u_true_frames: t_u,
        t_u_true_seconds: t_u as f64 / FPS,
        ins_true_literal: track_instability(&rel, InstabilityMode::Literal).map_err(kin)?,
        ins_true_displacement: track_instability(&rel, InstabilityMode::Displacement).map_err(kin)?,
        r_true_deg: rotation(&orient, unfold_frame).map_err(kin)?,
        frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub masks: Vec<MaskFrame>,
    pub detections: Vec<DetectionRecord>,
    pub phase: PhaseProbSeries,
    pub truth: SynthGroundTruth,
}

pub const MASKS_FILE: &str = "masks.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const PHASE_FILE: &str = "phase.csv";
pub const TRUTH_FILE: &str = "truth.json";

impl SynthVideo {
    pub fn mask_stream(&self) -> MaskStream {
        let mut lens = MaskSequence::new(MaskClass::Lens);
        let mut pupil = MaskSequence::new(MaskClass::Pupil);
        for m in &self.masks {
            match m.class {
                MaskClass::Lens => lens.frames.push(m.clone()),
                MaskClass::Pupil => pupil.frames.push(m.clone()),
            }
        }
        MaskStream { lens, pupil }
    }

    pub fn masks_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.masks {
            out.push_str(&m.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn detections_jsonl(&self) -> String {
        let mut buf = Vec::new();
        write_detection_stream(&mut buf, &self.detections).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 json")
    }

    /// Writes the three streams and the ground truth into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MASKS_FILE), self.masks_jsonl())?;
        fs::write(dir.join(DETECTIONS_FILE), self.detections_jsonl())?;
        fs::write(dir.join(PHASE_FILE), self.phase.to_csv())?;
        fs::write(dir.join(TRUTH_FILE), serde_json::to_string_pretty(&self.truth)? + "\n")?;
        Ok(())
    }
}

/// Slowly varying 2-D offset.
#[derive(Debug, Clone, Copy)]
struct Wobble {
    amp: f64,
    period: [f64; 2],
    phase: [f64; 2],
}

impl Wobble {
    fn draw(noise: &DetectionNoise, rng: &mut SynthRng) -> Self {
        let [p0, p1] = noise.jitter_period_frames;
        Self {
            amp: noise.center_jitter_px * std::f64::consts::SQRT_2,
            period: [rng.range(p0, p1), rng.range(p0, p1)],
            phase: [rng.range(0.0, std::f64::consts::TAU), rng.range(0.0, std::f64::consts::TAU)],
        }
    }

    fn at(&self, f: u64) -> Point {
        let t = f as f64 * std::f64::consts::TAU;
        Point::new(
            self.amp * (t / self.period[0] + self.phase[0]).sin(),
            self.amp * (t / self.period[1] + self.phase[1]).sin(),
        )
    }
}

fn round_to(v: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (v * k).round() / k
}

fn centered_box(c: Point, half_w: f64, half_h: f64) -> BBox {
    BBox::new(
        round_to(c.x - half_w, 2),
        round_to(c.y - half_h, 2),
        round_to(2.0 * half_w, 2),
        round_to(2.0 * half_h, 2),
    )
}

fn in_ranges(ranges: impl IntoIterator<Item = [u64; 2]>, tau: u64) -> bool {
    ranges.into_iter().any(|[a, b]| (a..=b).contains(&tau))
}

/// Renders one video. Same spec, same output, byte for byte.
pub fn generate_video(spec: &SynthSpec) -> Result<SynthVideo, SynthError> {
    let truth = ground_truth(spec)?;
    let start = spec.start_frame();
    let insertion = spec.insertion_frame();
    let (w, h) = (spec.width, spec.height);
    let [a, b] = spec.lens.semi_axes;
    let mut mask_rng = SynthRng::new(spec.seed, STREAM_MASKS);
    let mut det_rng = SynthRng::new(spec.seed, STREAM_DETECTIONS);
    let mut phase_rng = SynthRng::new(spec.seed, STREAM_PHASE);
    let dn = &spec.detection_noise;
    let wobbles = [
        Wobble::draw(dn, &mut det_rng),
        Wobble::draw(dn, &mut det_rng),
        Wobble::draw(dn, &mut det_rng),
    ];
    let sigma = spec.mask_noise.boundary_jitter_px;

    let mut masks = Vec::new();
    let mut detections = Vec::new();
    for f in 0..spec.n_frames {
        let tau_f = f as f64 - start as f64;
        let pose = spec.pose(tau_f);
        let tau = f.checked_sub(start);

        let mut pupil = ellipse_spans(pose.pupil_center, spec.pupil.radius, spec.pupil.radius, 0.0, w, h);
        jitter_spans(&mut pupil, sigma, w, &mut mask_rng);

        if f >= insertion {
            let (la, lb) = (a * pose.scale, b * pose.scale);
            let mut lens = ellipse_spans(pose.lens_center, la, lb, pose.theta_deg, w, h);
            jitter_spans(&mut lens, sigma, w, &mut mask_rng);
            if let Some(tau) = tau {
                for ev in spec.occlusions.iter().filter(|ev| in_ranges([ev.frames], tau)) {
                    let cone = notch_cone(pose.lens_center, la, lb, pose.theta_deg, ev.direction_deg, ev.fraction);
                    lens = subtract_cone(&lens, &cone);
                }
            }
            masks.push(MaskFrame::from_spans(f, MaskClass::Lens, w, h, &lens));

            let (s, c) = pose.theta_deg.to_radians().sin_cos();
            let half_w = (la * la * c * c + lb * lb * s * s).sqrt();
            let half_h = (la * la * s * s + lb * lb * c * c).sqrt();
            detections.push(DetectionRecord {
                frame_index: f,
                class: DetectionClass::Lens,
                bbox: centered_box(pose.lens_center + wobbles[0].at(f), half_w, half_h),
                confidence: round_to(det_rng.range(dn.confidence[0], dn.confidence[1]), 3),
            });
        }
        masks.push(MaskFrame::from_spans(f, MaskClass::Pupil, w, h, &pupil));

        let Some(tau) = tau else { continue };
        let reach = spec.hook_reach(pose.scale);
        let axis = Point::new(pose.theta_deg.to_radians().cos(), pose.theta_deg.to_radians().sin());
        let mut visible: Vec<(Point, f64)> = Vec::with_capacity(2);
        for (k, sign) in [(0usize, 1.0), (1, -1.0)] {
            let dropped = dn.dropouts.iter().any(|d| {
                in_ranges([d.frames], tau)
                    && matches!(
                        (d.hook, k),
                        (DropoutHook::Both, _) | (DropoutHook::First, 0) | (DropoutHook::Second, 1)
                    )
            });
            // Draw the confidence either way so dropouts do not shift the stream.
            let conf = round_to(det_rng.range(dn.confidence[0], dn.confidence[1]), 3);
            if !dropped {
                let center = pose.lens_center + Point::new(axis.x * sign * reach, axis.y * sign * reach) + wobbles[k + 1].at(f);
                visible.push((center, conf));
            }
        }
        for &(center, conf) in &visible {
            detections.push(DetectionRecord {
                frame_index: f,
                class: DetectionClass::Hook,
                bbox: centered_box(center, HOOK_BOX_PX / 2.0, HOOK_BOX_PX / 2.0),
                confidence: conf,
            });
        }
        let spurious = det_rng.uniform() < dn.spurious_rate;
        let (pick, radius, angle, u) = (det_rng.uniform(), det_rng.range(2.0, 6.0), det_rng.range(0.0, std::f64::consts::TAU), det_rng.uniform());
        if spurious && !visible.is_empty() {
            let (center, conf) = visible[(pick * visible.len() as f64) as usize];
            let conf = round_to(SPURIOUS_CONF_FLOOR + u * (conf - 0.01 - SPURIOUS_CONF_FLOOR), 3);
            detections.push(DetectionRecord {
                frame_index: f,
                class: DetectionClass::Hook,
                bbox: centered_box(center + Point::new(radius * angle.cos(), radius * angle.sin()), HOOK_BOX_PX / 2.0, HOOK_BOX_PX / 2.0),
                confidence: conf,
            });
        }
    }

    let pn = &spec.phase_noise;
    let [c0, c1] = spec.implantation_clip_range;
    let entries = (0..spec.n_frames)
        .map(|f| {
            let clip = f / CLIP_LEN_FRAMES;
            let positive = (c0..=c1).contains(&clip) || pn.false_positive_clips.contains(&clip);
            let base = if positive { pn.positive_prob } else { pn.negative_prob };
            let p = if pn.sigma > 0.0 { base + pn.sigma * phase_rng.normal() } else { base };
            (f, round_to(p.clamp(0.0, 1.0), 4))
        })
        .collect();

    Ok(SynthVideo {
        masks,
        detections,
        phase: PhaseProbSeries::new(entries),
        truth,
    })
}

// ---------------------------------------------------------------------------
// Spec builders and studies
// ---------------------------------------------------------------------------

/// Programmed kinematics of one video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoTargets {
    pub rotation_deg: f64,
    pub unfold_peak_frames: u64,
    pub drift_speed_px: f64,
}

/// Noise applied to every video of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseProfile {
    pub mask_jitter_px: f64,
    pub detection_jitter_px: f64,
    pub spurious_rate: f64,
    pub phase_sigma: f64,
    pub occlusions: bool,
    pub dropouts: bool,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            mask_jitter_px: 0.5,
            detection_jitter_px: 0.2,
            spurious_rate: 0.02,
            phase_sigma: 0.05,
            occlusions: true,
            dropouts: true,
        }
    }
}

impl NoiseProfile {
    pub fn none() -> Self {
        Self {
            mask_jitter_px: 0.0,
            detection_jitter_px: 0.0,
            spurious_rate: 0.0,
            phase_sigma: 0.0,
            occlusions: false,
            dropouts: false,
        }
    }
}

/// Builds a full spec realising `targets`; layout details are drawn from
/// `seed`.
pub fn build_spec(seed: u64, targets: VideoTargets, noise: &NoiseProfile) -> SynthSpec {
    let mut rng = SynthRng::new(seed, STREAM_SPEC);
    let (width, height) = (640u32, 480u32);
    let pupil_center = [320.0 + rng.range(-8.0, 8.0), 240.0 + rng.range(-8.0, 8.0)];
    let pupil_radius = rng.range(140.0, 165.0);
    let major = rng.range(55.0, 65.0);
    let minor = major * rng.range(0.7, 0.85);

    let c0 = rng.int(1, 3);
    let c1 = c0 + rng.int(2, 4);
    let start = (c1 + 1) * CLIP_LEN_FRAMES;
    let peak = targets.unfold_peak_frames;
    let post = peak + rng.int(500, 800);
    let n_frames = start + post;

    let unfolding = if peak == 0 {
        UnfoldingCurve::unfolded()
    } else {
        let midpoint = 0.55 * peak as f64;
        UnfoldingCurve {
            start_scale: rng.range(0.35, 0.5),
            midpoint,
            steepness: 2.0 / (peak as f64 - midpoint),
            peak_offset: peak,
            settle_scale: rng.range(0.8, 0.9),
        }
    };

    // Lens centre circles an offset point at the programmed speed.
    let offset = [rng.range(-8.0, 8.0), rng.range(-8.0, 8.0)];
    let radius = rng.range(8.0, 15.0);
    let omega = targets.drift_speed_px / radius;
    let phi = rng.range(0.0, std::f64::consts::TAU);
    let drift: Vec<[f64; 3]> = if targets.drift_speed_px == 0.0 {
        vec![[0.0, offset[0], offset[1]]]
    } else {
        (0..=post)
            .step_by(5)
            .map(|t| {
                let ang = phi + omega * t as f64;
                [t as f64, offset[0] + radius * ang.cos(), offset[1] + radius * ang.sin()]
            })
            .collect()
    };

    // Orientation holds until the peak, then turns monotonically in three
    // segments of random rate.
    let theta0 = rng.range(0.0, 180.0);
    let dir = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
    let mut orientation = vec![[0.0, theta0]];
    if targets.rotation_deg != 0.0 {
        let span = (post - peak - 1) as f64;
        let cuts = {
            let mut c = [rng.range(0.15, 0.45), rng.range(0.55, 0.85)];
            c.sort_by(f64::total_cmp);
            c
        };
        let weights = [rng.range(0.3, 1.0), rng.range(0.3, 1.0), rng.range(0.3, 1.0)];
        let lens_of = [cuts[0], cuts[1] - cuts[0], 1.0 - cuts[1]];
        let mass: f64 = weights.iter().zip(&lens_of).map(|(w, l)| w * l).sum();
        let mut t = peak as f64;
        let mut angle = theta0;
        if peak > 0 {
            orientation.push([t, angle]);
        }
        for k in 0..3 {
            t += lens_of[k] * span;
            angle += dir * targets.rotation_deg * weights[k] * lens_of[k] / mass;
            orientation.push([t, angle]);
        }
    }

    let motion = if noise.occlusions || noise.dropouts {
        let amp = [rng.range(-5.0, 5.0), rng.range(-5.0, 5.0)];
        vec![[0.0, 0.0, 0.0], [(post / 2) as f64, amp[0], amp[1]], [post as f64, 0.0, 0.0]]
    } else {
        Vec::new()
    };

    let mut occlusions = Vec::new();
    if noise.occlusions {
        // Kept clear of the area peak.
        let first_free = peak + 30;
        for _ in 0..rng.int(0, 2) {
            let len = rng.int(20, 60);
            let at = rng.int(first_free, post - len - 1);
            occlusions.push(OcclusionEvent {
                frames: [at, at + len],
                direction_deg: round_to(rng.range(0.0, 360.0), 2),
                fraction: round_to(rng.range(0.05, 0.2), 3),
            });
        }
    }
    let mut dropouts = Vec::new();
    if noise.dropouts {
        for _ in 0..rng.int(0, 2) {
            let len = rng.int(10, 40);
            let hook = match rng.int(0, 2) {
                0 => DropoutHook::First,
                1 => DropoutHook::Second,
                _ => DropoutHook::Both,
            };
            // Losing both hooks at the area peak would hide the first
            // orientation that counts towards rotation.
            let earliest = if hook == DropoutHook::Both { peak + 1 } else { 0 };
            let at = rng.int(earliest, post - len - 1);
            dropouts.push(HookDropout {
                frames: [at, at + len],
                hook,
            });
        }
    }
    let confidence = if noise == &NoiseProfile::none() { [0.9, 0.9] } else { [0.65, 0.99] };

    SynthSpec {
        seed,
        n_frames,
        width,
        height,
        implantation_clip_range: [c0, c1],
        pupil: PupilSpec {
            center: pupil_center,
            radius: pupil_radius,
            motion,
        },
        lens: LensSpec {
            semi_axes: [major, minor],
            unfolding,
            drift,
            orientation,
            hook_offset: 12.0,
        },
        occlusions,
        detection_noise: DetectionNoise {
            center_jitter_px: noise.detection_jitter_px,
            confidence,
            spurious_rate: noise.spurious_rate,
            dropouts,
            ..DetectionNoise::default()
        },
        mask_noise: MaskNoise {
            boundary_jitter_px: noise.mask_jitter_px,
        },
        phase_noise: PhaseNoise {
            sigma: noise.phase_sigma,
            ..PhaseNoise::default()
        },
    }
}

/// A spec with random targets and a random mix of noise sources.
pub fn random_video_spec(seed: u64) -> SynthSpec {
    let mut rng = SynthRng::new(seed, STREAM_SPEC + 1);
    let on = |rng: &mut SynthRng, p: f64| rng.uniform() < p;
    let noise = NoiseProfile {
        mask_jitter_px: if on(&mut rng, 0.8) { rng.range(0.2, 0.8) } else { 0.0 },
        detection_jitter_px: if on(&mut rng, 0.8) { rng.range(0.05, 0.3) } else { 0.0 },
        spurious_rate: if on(&mut rng, 0.6) { rng.range(0.01, 0.1) } else { 0.0 },
        phase_sigma: if on(&mut rng, 0.7) { rng.range(0.01, 0.08) } else { 0.0 },
        occlusions: on(&mut rng, 0.6),
        dropouts: on(&mut rng, 0.6),
    };
    let targets = VideoTargets {
        rotation_deg: rng.range(5.0, 60.0),
        unfold_peak_frames: rng.int(60, 250),
        drift_speed_px: rng.range(0.7, 1.4),
    };
    let mut spec = build_spec(seed, targets, &noise);
    if noise.spurious_rate == 0.0 && noise != NoiseProfile::none() && on(&mut rng, 0.5) {
        spec.detection_noise.confidence = [0.61, 0.99];
    }
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParam {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrandSpec {
    pub name: String,
    pub n_videos: usize,
    pub rotation_deg: NormalParam,
    #[serde(default = "default_peak")]
    pub unfold_peak_frames: NormalParam,
    #[serde(default = "default_speed")]
    pub drift_speed_px: NormalParam,
}

fn default_peak() -> NormalParam {
    NormalParam { mean: 120.0, sd: 25.0 }
}

fn default_speed() -> NormalParam {
    NormalParam { mean: 0.8, sd: 0.15 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub seed: u64,
    pub brands: Vec<BrandSpec>,
    #[serde(default)]
    pub noise: NoiseProfile,
}

/// Draws one video's targets from a brand's distributions. Rotation is
/// folded to non-negative values; peaks and speeds are kept in the ranges
/// the builder supports.
pub fn sample_targets(brand: &BrandSpec, rng: &mut SynthRng) -> VideoTargets {
    let draw = |p: NormalParam, rng: &mut SynthRng| p.mean + p.sd * rng.normal();
    VideoTargets {
        rotation_deg: draw(brand.rotation_deg, rng).abs(),
        unfold_peak_frames: draw(brand.unfold_peak_frames, rng).round().clamp(40.0, 400.0) as u64,
        drift_speed_px: draw(brand.drift_speed_px, rng).clamp(0.3, 2.0),
    }
}

impl StudySpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.brands.is_empty() {
            return Err(invalid("brands", "needs at least one brand"));
        }
        let mut names: Vec<&str> = self.brands.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("brands.name", "brand names must be unique"));
        }
        for b in &self.brands {
            if b.name.is_empty() || b.name.contains(['/', '\\']) {
                return Err(invalid("brands.name", "names must be non-empty path-safe strings"));
            }
            if b.n_videos == 0 {
                return Err(invalid("brands.n_videos", "must be positive"));
            }
            for p in [b.rotation_deg, b.unfold_peak_frames, b.drift_speed_px] {
                if !(p.mean.is_finite() && p.sd >= 0.0) {
                    return Err(invalid("brands", "distribution needs finite mean and sd >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Video specs per brand, in brand order.
    pub fn video_specs(&self) -> Result<Vec<BrandPlan>, SynthError> {
        self.validate()?;
        let mut rng = SynthRng::new(self.seed, STREAM_SPEC);
        let mut out = Vec::new();
        let mut counter = 0u64;
        for brand in &self.brands {
            let mut videos = Vec::with_capacity(brand.n_videos);
            for _ in 0..brand.n_videos {
                let targets = sample_targets(brand, &mut rng);
                let seed = self.seed.wrapping_mul(1_000_003).wrapping_add(counter);
                counter += 1;
                videos.push((targets, build_spec(seed, targets, &self.noise)));
            }
            out.push((brand.name.clone(), videos));
        }
        Ok(out)
    }
}

/// A brand name with the targets and spec of each of its videos.
pub type BrandPlan = (String, Vec<(VideoTargets, SynthSpec)>);

pub const MANIFEST_FILE: &str = "manifest.json";

/// Renders every video of a study into `out_dir/<brand>/video_NNN/` and
/// writes `out_dir/manifest.json`.
pub fn generate_study(spec: &StudySpec, out_dir: &Path) -> Result<StudyManifest, SynthError> {
    use rayon::prelude::*;
    let plan = spec.video_specs()?;
    let mut manifest = StudyManifest { brands: Vec::new() };
    for (name, videos) in &plan {
        let rel_dirs: Vec<PathBuf> = (0..videos.len())
            .map(|i| PathBuf::from(name).join(format!("video_{i:03}")))
            .collect();
        videos
            .par_iter()
            .zip(&rel_dirs)
            .try_for_each(|((targets, vspec), rel)| -> Result<(), SynthError> {
                let dir = out_dir.join(rel);
                generate_video(vspec)?.write_to(&dir)?;
                fs::write(dir.join("spec.json"), serde_json::to_string_pretty(vspec)? + "\n")?;
                fs::write(dir.join("targets.json"), serde_json::to_string_pretty(targets)? + "\n")?;
                Ok(())
            })?;
        manifest.brands.push(BrandEntry {
            name: name.clone(),
            videos: rel_dirs
                .iter()
                .map(|rel| VideoInputs {
                    masks: rel.join(MASKS_FILE),
                    detections: rel.join(DETECTIONS_FILE),
                    phase: rel.join(PHASE_FILE),
                })
                .collect(),
        });
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
