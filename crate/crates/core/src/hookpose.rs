//! Lens orientation from hook detections.
//!
//! Detections at or below the confidence threshold are dropped. The rest
//! are reduced to at most two hooks:
//!
//! 1. zero or one hook passes through unchanged;
//! 2. two hooks are both kept if they sit roughly opposite each other
//!    around the lens centre, otherwise only the more confident one;
//! 3. more than two are split into two clusters by complete-linkage
//!    agglomerative clustering, the most confident box of each cluster is
//!    kept, and the pair is then treated as in case 2.
//!
//! Orientation is the direction of the line through the two hooks, or of
//! the line from the lens centre to a single hook.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::ingest::{DetectionClass, DetectionRecord};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.6;
pub const DEFAULT_OPPOSITION_TOL_DEG: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum HookError {
    #[error("hook at ({x}, {y}) coincides with the reference point")]
    DegenerateVector { x: f64, y: f64 },
    #[error("clustering needs at least 3 points, got {0}")]
    TooFewPoints(usize),
}

/// Keeps detections with confidence strictly above `threshold`.
pub fn filter_by_confidence(dets: &[DetectionRecord], threshold: f64) -> Vec<DetectionRecord> {
    dets.iter().filter(|d| d.confidence > threshold).copied().collect()
}

/// Unsigned angle between two vectors in degrees, `[0, 180]`.
fn angle_between(a: Point, b: Point) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    let dot = a.x * b.x + a.y * b.y;
    cross.abs().atan2(dot).to_degrees()
}

/// Whether two hooks subtend `180 ± tol_deg` degrees around `center`.
pub fn opposition_check(h1: Point, h2: Point, center: Point, tol_deg: f64) -> Result<bool, HookError> {
    let (v1, v2) = (h1 - center, h2 - center);
    for (v, h) in [(v1, h1), (v2, h2)] {
        if v.x == 0.0 && v.y == 0.0 {
            return Err(HookError::DegenerateVector { x: h.x, y: h.y });
        }
    }
    Ok(angle_between(v1, v2) >= 180.0 - tol_deg)
}

/// Complete-linkage agglomerative clustering of `points` down to two
/// clusters, returned as sorted index lists ordered by their smallest
/// member. Distance ties merge the lexicographically smallest pair of
/// cluster representatives first.
pub fn cluster_two(points: &[Point]) -> Result<[Vec<usize>; 2], HookError> {
    let n = points.len();
    if n < 3 {
        return Err(HookError::TooFewPoints(n));
    }
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    // Linkage between live clusters, indexed by position in `clusters`.
    let mut link: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| points[i].distance(points[j])).collect())
        .collect();
    while clusters.len() > 2 {
        let mut best = (0, 1);
        let mut best_d = f64::INFINITY;
        for (a, row) in link.iter().enumerate() {
            for (b, &d) in row.iter().enumerate().skip(a + 1) {
                if d < best_d {
                    best_d = d;
                    best = (a, b);
                }
            }
        }
        let (a, b) = best;
        let absorbed = clusters.remove(b);
        clusters[a].extend(absorbed);
        clusters[a].sort_unstable();
        let row_b = link.remove(b);
        for row in link.iter_mut() {
            row.remove(b);
        }
        for (c, &d) in row_b.iter().enumerate().filter(|&(c, _)| c != b) {
            let c = if c > b { c - 1 } else { c };
            let merged = link[a][c].max(d);
            link[a][c] = merged;
            link[c][a] = merged;
        }
        link[a][a] = 0.0;
    }
    // Clusters stay ordered by their smallest member throughout.
    let second = clusters.pop().expect("two clusters");
    let first = clusters.pop().expect("two clusters");
    Ok([first, second])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hook {
    pub center: Point,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ZeroOrOne,
    Pair,
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HookSelection {
    pub frame_index: u64,
    pub kept_hooks: Vec<Hook>,
    pub scenario: Scenario,
}

fn more_confident(a: Hook, b: Hook) -> Hook {
    if b.confidence > a.confidence {
        b
    } else {
        a
    }
}

fn resolve_pair(a: Hook, b: Hook, lens_center: Point, tol_deg: f64) -> Vec<Hook> {
    match opposition_check(a.center, b.center, lens_center, tol_deg) {
        Ok(true) => vec![a, b],
        // A hook on the lens centre cannot define an axis with the other.
        Ok(false) | Err(_) => vec![more_confident(a, b)],
    }
}

/// Reduces confidence-filtered hook detections of one frame to at most
/// two hooks. Non-hook records are ignored.
pub fn select_hooks(
    frame_index: u64,
    hook_dets: &[DetectionRecord],
    lens_center: Point,
    tol_deg: f64,
) -> HookSelection {
    let hooks: Vec<Hook> = hook_dets
        .iter()
        .filter(|d| d.class == DetectionClass::Hook)
        .map(|d| Hook {
            center: d.bbox.center().into(),
            confidence: d.confidence,
        })
        .collect();
    let (kept_hooks, scenario) = match hooks.len() {
        0 | 1 => (hooks, Scenario::ZeroOrOne),
        2 => (resolve_pair(hooks[0], hooks[1], lens_center, tol_deg), Scenario::Pair),
        _ => {
            let centers: Vec<Point> = hooks.iter().map(|h| h.center).collect();
            let clusters = cluster_two(&centers).expect("at least three hooks");
            let best = |members: &[usize]| {
                members
                    .iter()
                    .map(|&i| hooks[i])
                    .reduce(more_confident)
                    .expect("clusters are non-empty")
            };
            let (a, b) = (best(&clusters[0]), best(&clusters[1]));
            (resolve_pair(a, b, lens_center, tol_deg), Scenario::Clustered)
        }
    };
    HookSelection {
        frame_index,
        kept_hooks,
        scenario,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationSource {
    TwoHooks,
    OneHook,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationSample {
    pub frame_index: u64,
    pub angle_deg: f64,
    pub source: OrientationSource,
}

/// Lens orientation for one frame, `None` when no hook was kept.
pub fn orientation(selection: &HookSelection, lens_center: Point) -> Result<Option<OrientationSample>, HookError> {
    let (vector, source, anchor) = match selection.kept_hooks.as_slice() {
        [] => return Ok(None),
        [h] => (h.center - lens_center, OrientationSource::OneHook, h.center),
        [h1, h2, ..] => (h2.center - h1.center, OrientationSource::TwoHooks, h2.center),
    };
    if vector.x == 0.0 && vector.y == 0.0 {
        return Err(HookError::DegenerateVector {
            x: anchor.x,
            y: anchor.y,
        });
    }
    Ok(Some(OrientationSample {
        frame_index: selection.frame_index,
        angle_deg: vector.angle_deg(),
        source,
    }))
}

/// Lens centre for a frame: the most confident lens box, else the lens
/// mask centroid, else the previous frame's centre.
pub fn resolve_lens_center(
    lens_dets: &[DetectionRecord],
    mask_centroid: Option<Point>,
    previous: Option<Point>,
) -> Option<Point> {
    lens_dets
        .iter()
        .filter(|d| d.class == DetectionClass::Lens)
        .reduce(|a, b| if b.confidence > a.confidence { b } else { a })
        .map(|d| d.bbox.center().into())
        .or(mask_centroid)
        .or(previous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::BBox;

    fn hook_at(x: f64, y: f64, conf: f64) -> DetectionRecord {
        DetectionRecord {
            frame_index: 0,
            class: DetectionClass::Hook,
            bbox: BBox::new(x - 2.0, y - 2.0, 4.0, 4.0),
            confidence: conf,
        }
    }

    const ORIGIN: Point = Point::new(0.0, 0.0);

    #[test]
    fn confidence_filter_is_strict() {
        let dets = [hook_at(1.0, 1.0, 0.5), hook_at(2.0, 2.0, 0.7), hook_at(3.0, 3.0, 0.6)];
        let kept = filter_by_confidence(&dets, 0.6);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, 0.7);
        assert!(filter_by_confidence(&dets[..1], 0.6).is_empty());
    }

    #[test]
    fn opposition_examples() {
        let c = ORIGIN;
        assert!(opposition_check(Point::new(10.0, 0.0), Point::new(-10.0, 0.0), c, 30.0).unwrap());
        assert!(!opposition_check(Point::new(10.0, 0.0), Point::new(0.0, 10.0), c, 30.0).unwrap());
        assert!(opposition_check(Point::new(10.0, 0.0), Point::new(-10.0, 3.0), c, 30.0).unwrap());
        assert_eq!(
            opposition_check(c, Point::new(1.0, 0.0), c, 30.0),
            Err(HookError::DegenerateVector { x: 0.0, y: 0.0 })
        );
    }

    #[test]
    fn cluster_examples() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(100.0, 0.0)];
        assert_eq!(cluster_two(&pts).unwrap(), [vec![0, 1], vec![2]]);
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(50.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(50.0, 1.0),
        ];
        assert_eq!(cluster_two(&pts).unwrap(), [vec![0, 2], vec![1, 3]]);
        assert_eq!(cluster_two(&pts[..2]), Err(HookError::TooFewPoints(2)));
    }

    #[test]
    fn cluster_ties_merge_smallest_pair() {
        // (0, 1) and (1, 2) are both 1 apart.
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        assert_eq!(cluster_two(&pts).unwrap(), [vec![0, 1], vec![2]]);
    }

    #[test]
    fn scenario_one_passes_through() {
        let sel = select_hooks(3, &[hook_at(5.0, 0.0, 0.7)], ORIGIN, 30.0);
        assert_eq!(sel.scenario, Scenario::ZeroOrOne);
        assert_eq!(sel.kept_hooks.len(), 1);
        assert_eq!(sel.kept_hooks[0].confidence, 0.7);
        let none = select_hooks(3, &[], ORIGIN, 30.0);
        assert!(none.kept_hooks.is_empty());
    }

    #[test]
    fn scenario_two_keeps_more_confident_when_not_opposed() {
        let dets = [hook_at(10.0, 0.0, 0.9), hook_at(0.0, 10.0, 0.8)];
        let sel = select_hooks(0, &dets, ORIGIN, 30.0);
        assert_eq!(sel.scenario, Scenario::Pair);
        assert_eq!(sel.kept_hooks.len(), 1);
        assert_eq!(sel.kept_hooks[0].confidence, 0.9);
        let dets = [hook_at(10.0, 0.0, 0.7), hook_at(-10.0, 0.0, 0.8)];
        assert_eq!(select_hooks(0, &dets, ORIGIN, 30.0).kept_hooks.len(), 2);
    }

    #[test]
    fn scenario_three_clusters_then_pairs() {
        let dets = [
            hook_at(100.0, 0.0, 0.7),
            hook_at(102.0, 2.0, 0.9),
            hook_at(-100.0, 0.0, 0.8),
        ];
        let sel = select_hooks(0, &dets, ORIGIN, 30.0);
        assert_eq!(sel.scenario, Scenario::Clustered);
        let kept: Vec<Point> = sel.kept_hooks.iter().map(|h| h.center).collect();
        assert_eq!(kept, vec![Point::new(102.0, 2.0), Point::new(-100.0, 0.0)]);
    }

    #[test]
    fn orientation_examples() {
        let sel = |hooks: Vec<Point>| HookSelection {
            frame_index: 0,
            kept_hooks: hooks
                .into_iter()
                .map(|c| Hook { center: c, confidence: 0.9 })
                .collect(),
            scenario: Scenario::Pair,
        };
        let o = orientation(&sel(vec![Point::new(-10.0, 0.0), Point::new(10.0, 0.0)]), ORIGIN)
            .unwrap()
            .unwrap();
        assert_eq!((o.angle_deg, o.source), (0.0, OrientationSource::TwoHooks));
        let o = orientation(&sel(vec![Point::new(0.0, -10.0), Point::new(0.0, 10.0)]), ORIGIN)
            .unwrap()
            .unwrap();
        assert_eq!(o.angle_deg, 90.0);
        let c = Point::new(3.0, 4.0);
        let o = orientation(&sel(vec![Point::new(8.0, 9.0)]), c).unwrap().unwrap();
        assert!((o.angle_deg - 45.0).abs() < 1e-12);
        assert_eq!(o.source, OrientationSource::OneHook);
        assert_eq!(orientation(&sel(vec![]), c).unwrap(), None);
        assert!(orientation(&sel(vec![c]), c).is_err());
    }

    #[test]
    fn lens_center_priority() {
        let lens = DetectionRecord {
            frame_index: 0,
            class: DetectionClass::Lens,
            bbox: BBox::new(0.0, 0.0, 10.0, 20.0),
            confidence: 0.9,
        };
        let mask = Some(Point::new(1.0, 1.0));
        let prev = Some(Point::new(2.0, 2.0));
        assert_eq!(resolve_lens_center(&[lens], mask, prev), Some(Point::new(5.0, 10.0)));
        assert_eq!(resolve_lens_center(&[], mask, prev), mask);
        assert_eq!(resolve_lens_center(&[], None, prev), prev);
        assert_eq!(resolve_lens_center(&[], None, None), None);
    }
}
