use iolkin::evalmetrics::{average_precision_at_iou, mask_dice, mask_iou, orientation_error_summary};
use iolkin::geometry::Point;
use iolkin::ingest::{encode_rle, BBox, DetectionClass, DetectionRecord, MaskClass, MaskFrame, PhaseProbSeries};
use iolkin::kinematics::{instability, rotation, smooth_area, unfolding_time, InstabilityMode};
use iolkin::phase::{
    aggregate_clip_probability, classify_clips, locate_implantation_interval, CLIP_LEN_FRAMES,
};
use iolkin::stats::{boxplot_summary, pearson, student_t_sf, ttest, TTestMode};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn mode() -> impl Strategy<Value = InstabilityMode> {
    prop_oneof![Just(InstabilityMode::Literal), Just(InstabilityMode::Displacement)]
}

fn points(min: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), min..40)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 4..30)
        .prop_filter("not constant", |v| v.iter().any(|&x| x != v[0]))
}

fn mask_pair() -> impl Strategy<Value = (MaskFrame, MaskFrame)> {
    (1u32..20, 1u32..20).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n)).prop_map(
            move |(a, b)| {
                let f = |c: &[bool]| MaskFrame {
                    frame_index: 0,
                    class: MaskClass::Lens,
                    width: w,
                    height: h,
                    rle: encode_rle(c, w, h).unwrap(),
                };
                (f(&a), f(&b))
            },
        )
    })
}

fn boxes(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<DetectionRecord>> {
    prop::collection::vec((0u64..5, 0u32..20, 0u32..20, 2u32..8, 2u32..8, 0u32..1000), n).prop_map(|raw| {
        let mut v: Vec<DetectionRecord> = raw
            .into_iter()
            .map(|(f, x, y, w, h, c)| DetectionRecord {
                frame_index: f,
                class: DetectionClass::Hook,
                bbox: BBox::new(x as f64, y as f64, w as f64, h as f64),
                confidence: c as f64 / 1000.0,
            })
            .collect();
        v.sort_by_key(|d| d.frame_index);
        v
    })
}

proptest! {
    #[test]
    fn smoothing_matches_window_means(values in prop::collection::vec(0.0f64..1e4, 0..80), half in 0usize..8) {
        let window = 2 * half + 1;
        let out = smooth_area(&values, window).unwrap();
        prop_assert_eq!(out.len(), values.len());
        for (i, &o) in out.iter().enumerate() {
            let expected = if values.len() >= window && i >= half && i + half < values.len() {
                values[i - half..=i + half].iter().sum::<f64>() / window as f64
            } else {
                values[i]
            };
            prop_assert!(close(o, expected, 1e-12));
        }
    }

    #[test]
    fn smoothing_constant_is_constant(c in 0u32..100_000, n in 1usize..60) {
        let out = smooth_area(&vec![c as f64; n], 15).unwrap();
        prop_assert!(out.iter().all(|&v| v == c as f64));
    }

    #[test]
    fn unfolding_time_ignores_positive_affine_maps(
        areas in prop::collection::vec(0u32..50_000, 1..120),
        a in 1u32..50,
        b in -1000i32..1000,
    ) {
        let raw: Vec<f64> = areas.iter().map(|&v| v as f64).collect();
        let mapped: Vec<f64> = raw.iter().map(|&v| a as f64 * v + b as f64).collect();
        let t1 = unfolding_time(&smooth_area(&raw, 15).unwrap()).unwrap();
        let t2 = unfolding_time(&smooth_area(&mapped, 15).unwrap()).unwrap();
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn instability_is_nonnegative_and_additive(pts in points(3), mode in mode(), cut in any::<prop::sample::Index>()) {
        let k = 1 + cut.index(pts.len() - 2);
        let total = instability(&pts, mode).unwrap();
        let parts = instability(&pts[..=k], mode).unwrap() + instability(&pts[k..], mode).unwrap();
        prop_assert!(total >= 0.0);
        prop_assert!(close(total, parts, 1e-12));
    }

    #[test]
    fn rotation_is_nonnegative_additive_and_offset_free(
        angles in prop::collection::vec(0.0f64..360.0, 3..60),
        cut in any::<prop::sample::Index>(),
        offset in -720.0f64..720.0,
    ) {
        let series: Vec<(u64, f64)> = angles.iter().enumerate().map(|(i, &a)| (i as u64, a)).collect();
        let k = 1 + cut.index(series.len() - 2);
        let total = rotation(&series, 0).unwrap();
        let parts = rotation(&series[..=k], 0).unwrap() + rotation(&series[k..], 0).unwrap();
        prop_assert!(total >= 0.0);
        prop_assert!(close(total, parts, 1e-12));
        let shifted: Vec<(u64, f64)> = series.iter().map(|&(f, a)| (f, a + offset)).collect();
        prop_assert!(close(rotation(&shifted, 0).unwrap(), total, 1e-9));
    }

    #[test]
    fn pearson_affine_and_sign(x in sample(), y_seed in sample(), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let n = x.len().min(y_seed.len());
        let (x, y) = (&x[..n], &y_seed[..n]);
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        let r = pearson(x, y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        let xa: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson(&xa, y).unwrap() - r).abs() < 1e-9);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((pearson(x, &neg).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn ttest_antisymmetric(x in sample(), y in sample()) {
        let a = ttest(&x, &y, TTestMode::Standard).unwrap();
        let b = ttest(&y, &x, TTestMode::Standard).unwrap();
        prop_assert!(close(a.statistic, -b.statistic, 1e-12));
        prop_assert!(close(a.p_value.unwrap(), b.p_value.unwrap(), 1e-12));
    }

    #[test]
    fn student_t_sf_monotone_and_symmetric(t1 in -30.0f64..30.0, t2 in -30.0f64..30.0, dof in 1.0f64..200.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(student_t_sf(lo, dof).unwrap() >= student_t_sf(hi, dof).unwrap());
        prop_assert!((student_t_sf(t1, dof).unwrap() + student_t_sf(-t1, dof).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boxplot_ignores_order(v in prop::collection::vec(-1e3f64..1e3, 4..40).prop_shuffle(), seed in any::<u64>()) {
        let mut other = v.clone();
        let k = seed as usize % v.len();
        other.rotate_left(k);
        other.reverse();
        prop_assert_eq!(boxplot_summary(&v).unwrap(), boxplot_summary(&other).unwrap());
        let b = boxplot_summary(&v).unwrap();
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(b.lower_whisker >= b.q1 - 1.5 * b.iqr && b.upper_whisker <= b.q3 + 1.5 * b.iqr);
    }

    #[test]
    fn iou_at_most_dice_and_symmetric((a, b) in mask_pair()) {
        let (iou, dice) = (mask_iou(&a, &b).unwrap(), mask_dice(&a, &b).unwrap());
        prop_assert!(iou <= dice + 1e-15);
        prop_assert_eq!(iou, mask_iou(&b, &a).unwrap());
        prop_assert_eq!(dice, mask_dice(&b, &a).unwrap());
    }

    #[test]
    fn ap_ignores_monotone_confidence_maps(dets in boxes(0..25), gts in boxes(1..10)) {
        let mut seen = std::collections::BTreeSet::new();
        prop_assume!(dets.iter().all(|d| seen.insert(d.confidence.to_bits())));
        let ap = average_precision_at_iou(&dets, &gts, 0.5).unwrap();
        let squashed: Vec<DetectionRecord> = dets
            .iter()
            .map(|d| DetectionRecord { confidence: d.confidence * d.confidence * 0.5 + 0.1, ..*d })
            .collect();
        prop_assert_eq!(ap, average_precision_at_iou(&squashed, &gts, 0.5).unwrap());
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn topk_means_shrink_with_k(pred in prop::collection::vec(0.0f64..360.0, 1..60), noise in prop::collection::vec(-40.0f64..40.0, 60)) {
        let truth: Vec<f64> = pred.iter().zip(&noise).map(|(p, n)| p + n).collect();
        let s = orientation_error_summary(&pred, &truth).unwrap();
        let k = s.topk_means;
        prop_assert!(k.p25 <= k.p50 + 1e-12 && k.p50 <= k.p75 + 1e-12 && k.p75 <= s.mean + 1e-12);
    }

    #[test]
    fn aggregation_ignores_sample_order(p in prop::collection::vec(0.0f64..=1.0, 5).prop_shuffle(), k in 0usize..5) {
        let mut q = p.clone();
        q.rotate_left(k);
        prop_assert_eq!(aggregate_clip_probability(&p).unwrap(), aggregate_clip_probability(&q).unwrap());
    }

    #[test]
    fn clip_labels_are_pure_and_start_is_clip_aligned(
        probs in prop::collection::vec(0.0f64..=1.0, 75..900),
        threshold in 0.05f64..0.95,
    ) {
        let series = PhaseProbSeries::new(probs.iter().enumerate().map(|(f, &p)| (f as u64, p)).collect());
        let a = classify_clips(&series, threshold).unwrap();
        prop_assert_eq!(&a, &classify_clips(&series, threshold).unwrap());
        prop_assert_eq!(a.labels.len() as u64, probs.len() as u64 / CLIP_LEN_FRAMES);
        for (l, p) in a.labels.iter().zip(&a.clip_probs) {
            prop_assert_eq!(*l, *p >= threshold);
        }
        if let Ok(iv) = locate_implantation_interval(&a.labels) {
            prop_assert_eq!(iv.post_implantation_start_frame % CLIP_LEN_FRAMES, 0);
            prop_assert!(iv.first_clip <= iv.last_clip);
        }
    }
}
