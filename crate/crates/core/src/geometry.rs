//! Mask refinement and per-frame measurements.
//!
//! Pixel `(x, y)` is identified with the integer point at its centre.
//! Refinement replaces a mask by the filled convex hull of its foreground
//! pixel centres; instrument occlusions leave dents that the hull closes.
//! All routines work on row spans so a mask is never expanded to a bitmap.

use std::ops::{Add, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MaskFrame, MaskSequence, RowSpan};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("mask for frame {0} has no foreground")]
    EmptyMask(u64),
    #[error("mask dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("lens and pupil sequences share no frame at or after {0}")]
    NoOverlap(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Direction of the vector in degrees, `[0, 360)`, measured with
    /// `atan2(y, x)` in image coordinates (y pointing down).
    pub fn angle_deg(self) -> f64 {
        let deg = self.y.atan2(self.x).to_degrees();
        let wrapped = deg.rem_euclid(360.0);
        if wrapped >= 360.0 {
            0.0
        } else {
            wrapped
        }
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

type IPoint = (i64, i64);

fn cross(o: IPoint, a: IPoint, b: IPoint) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain hull, counter-clockwise, without collinear vertices.
fn convex_hull(mut pts: Vec<IPoint>) -> Vec<IPoint> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<IPoint> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn floor_div(num: i64, den: i64) -> i64 {
    num.div_euclid(den)
}

fn ceil_div(num: i64, den: i64) -> i64 {
    -(-num).div_euclid(den)
}

/// Scanline fill of a convex polygon: on each row, every pixel centre
/// whose position lies on or inside the hull is set.
fn fill_hull(hull: &[IPoint]) -> Vec<RowSpan> {
    let y_min = hull.iter().map(|p| p.1).min().expect("non-empty hull");
    let y_max = hull.iter().map(|p| p.1).max().expect("non-empty hull");
    let mut spans = Vec::with_capacity((y_max - y_min + 1) as usize);
    for y in y_min..=y_max {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for (i, &a) in hull.iter().enumerate() {
            if a.1 == y {
                lo = lo.min(a.0);
                hi = hi.max(a.0);
            }
            let b = hull[(i + 1) % hull.len()];
            if a.1 == b.1 || y < a.1.min(b.1) || y > a.1.max(b.1) {
                continue;
            }
            let (mut num, mut den) = ((y - a.1) * (b.0 - a.0), b.1 - a.1);
            if den < 0 {
                num = -num;
                den = -den;
            }
            lo = lo.min(a.0 + ceil_div(num, den));
            hi = hi.max(a.0 + floor_div(num, den));
        }
        if lo <= hi {
            spans.push(RowSpan {
                y: y as u32,
                x_start: lo as u32,
                x_end: (hi + 1) as u32,
            });
        }
    }
    spans
}

/// Filled convex hull of the mask's foreground. Idempotent, and the
/// result always contains the input foreground.
pub fn convex_refine(mask: &MaskFrame) -> Result<MaskFrame, GeometryError> {
    let spans = mask.row_spans();
    if spans.is_empty() {
        return Err(GeometryError::EmptyMask(mask.frame_index));
    }
    // Only the extreme pixels of each row can be hull vertices.
    let mut extremes: Vec<IPoint> = Vec::with_capacity(2 * mask.height as usize);
    let mut i = 0;
    while i < spans.len() {
        let y = spans[i].y;
        let first = spans[i].x_start;
        let mut last = spans[i].x_end - 1;
        while i < spans.len() && spans[i].y == y {
            last = spans[i].x_end - 1;
            i += 1;
        }
        extremes.push((first as i64, y as i64));
        extremes.push((last as i64, y as i64));
    }
    let hull = convex_hull(extremes);
    let filled = fill_hull(&hull);
    Ok(MaskFrame::from_spans(
        mask.frame_index,
        mask.class,
        mask.width,
        mask.height,
        &filled,
    ))
}

/// Mean foreground pixel coordinate.
pub fn mask_centroid(mask: &MaskFrame) -> Result<Point, GeometryError> {
    let mut count = 0u64;
    let mut sum_x = 0u128;
    let mut sum_y = 0u128;
    for span in mask.row_spans() {
        let n = span.len() as u64;
        count += n;
        // Sum of x over [x_start, x_end) without overflow in u64 halves.
        sum_x += (span.x_start as u128 + span.x_end as u128 - 1) * n as u128 / 2;
        sum_y += span.y as u128 * n as u128;
    }
    if count == 0 {
        return Err(GeometryError::EmptyMask(mask.frame_index));
    }
    Ok(Point::new(
        sum_x as f64 / count as f64,
        sum_y as f64 / count as f64,
    ))
}

/// Foreground pixel count.
pub fn mask_area(mask: &MaskFrame) -> f64 {
    mask.foreground_count() as f64
}

/// Lens centroid relative to the pupil centroid.
pub fn relative_position(lens: &MaskFrame, pupil: &MaskFrame) -> Result<Point, GeometryError> {
    let (ld, pd) = ((lens.width, lens.height), (pupil.width, pupil.height));
    if ld != pd {
        return Err(GeometryError::DimensionMismatch(ld, pd));
    }
    Ok(mask_centroid(lens)? - mask_centroid(pupil)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub frame_index: u64,
    pub lens_center: Point,
    pub pupil_center: Point,
    pub lens_area: f64,
    pub pupil_area: f64,
    pub rel_pos: Point,
}

/// Refines and measures one lens/pupil pair. `None` if either is empty.
pub fn measure_frame(lens: &MaskFrame, pupil: &MaskFrame) -> Result<Option<FrameGeometry>, GeometryError> {
    if lens.is_empty() || pupil.is_empty() {
        return Ok(None);
    }
    let (ld, pd) = ((lens.width, lens.height), (pupil.width, pupil.height));
    if ld != pd {
        return Err(GeometryError::DimensionMismatch(ld, pd));
    }
    let lens = convex_refine(lens)?;
    let pupil = convex_refine(pupil)?;
    let lens_center = mask_centroid(&lens)?;
    let pupil_center = mask_centroid(&pupil)?;
    Ok(Some(FrameGeometry {
        frame_index: lens.frame_index,
        lens_center,
        pupil_center,
        lens_area: mask_area(&lens),
        pupil_area: mask_area(&pupil),
        rel_pos: lens_center - pupil_center,
    }))
}

/// Per-frame geometry for every frame at or after `start_frame` where both
/// sequences carry a mask. Frames with an empty mask are skipped.
pub fn build_track(
    lens_seq: &MaskSequence,
    pupil_seq: &MaskSequence,
    start_frame: u64,
) -> Result<Vec<FrameGeometry>, GeometryError> {
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (lens, pupil) = (&lens_seq.frames, &pupil_seq.frames);
    while i < lens.len() && j < pupil.len() {
        let (lf, pf) = (lens[i].frame_index, pupil[j].frame_index);
        if lf < pf {
            i += 1;
        } else if pf < lf {
            j += 1;
        } else {
            if lf >= start_frame {
                pairs.push((&lens[i], &pupil[j]));
            }
            i += 1;
            j += 1;
        }
    }
    if pairs.is_empty() {
        return Err(GeometryError::NoOverlap(start_frame));
    }
    let measured: Result<Vec<_>, _> = pairs
        .par_iter()
        .map(|(l, p)| measure_frame(l, p))
        .collect();
    Ok(measured?.into_iter().flatten().collect())
}
