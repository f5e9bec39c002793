use iolkin::ingest::{
    decode_rle, encode_rle, parse_detection_stream, parse_mask_stream, parse_phase_series,
    write_detection_stream, write_mask_stream, BBox, DetectionClass, DetectionRecord, IngestError,
    MaskClass, MaskFrame, PhaseProbSeries,
};
use proptest::prelude::*;

fn bitmap() -> impl Strategy<Value = (u32, u32, Vec<bool>)> {
    (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
        (Just(w), Just(h), prop::collection::vec(any::<bool>(), (w * h) as usize))
    })
}

fn mask_frames() -> impl Strategy<Value = Vec<MaskFrame>> {
    (bitmap(), 1usize..6).prop_flat_map(|((w, h, _), n)| {
        prop::collection::vec(
            (prop::collection::vec(any::<bool>(), (w * h) as usize), any::<bool>()),
            n,
        )
        .prop_map(move |cells| {
            cells
                .into_iter()
                .enumerate()
                .map(|(i, (c, lens))| MaskFrame {
                    frame_index: i as u64 * 3,
                    class: if lens { MaskClass::Lens } else { MaskClass::Pupil },
                    width: w,
                    height: h,
                    rle: encode_rle(&c, w, h).unwrap(),
                })
                .collect()
        })
    })
}

fn detections() -> impl Strategy<Value = Vec<DetectionRecord>> {
    prop::collection::vec(
        (0u64..4, any::<bool>(), 0u32..500, 0u32..400, 1u32..80, 1u32..80, 0u32..=1000),
        1..30,
    )
    .prop_map(|raw| {
        let mut frame = 0;
        raw.into_iter()
            .map(|(step, hook, x, y, w, h, c)| {
                frame += step;
                DetectionRecord {
                    frame_index: frame,
                    class: if hook { DetectionClass::Hook } else { DetectionClass::Lens },
                    bbox: BBox::new(x as f64 / 4.0, y as f64 / 4.0, w as f64 / 4.0, h as f64 / 4.0),
                    confidence: c as f64 / 1000.0,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn rle_round_trip((w, h, cells) in bitmap()) {
        let rle = encode_rle(&cells, w, h).unwrap();
        prop_assert_eq!(rle.iter().map(|&r| r as u64).sum::<u64>(), (w * h) as u64);
        prop_assert!(rle.iter().skip(1).all(|&r| r > 0));
        let back = decode_rle(&rle, w, h).unwrap();
        prop_assert_eq!(back.cells, cells);
    }

    #[test]
    fn mask_stream_reserializes_byte_identically(frames in mask_frames()) {
        let mut text = Vec::new();
        write_mask_stream(&mut text, &frames).unwrap();
        let stream = parse_mask_stream(text.as_slice()).unwrap();
        let mut all: Vec<&MaskFrame> = stream.lens.frames.iter().chain(&stream.pupil.frames).collect();
        all.sort_by_key(|m| m.frame_index);
        let mut again = Vec::new();
        write_mask_stream(&mut again, all).unwrap();
        prop_assert_eq!(String::from_utf8(again).unwrap(), String::from_utf8(text).unwrap());
    }

    #[test]
    fn detection_stream_reserializes_byte_identically(recs in detections()) {
        let mut text = Vec::new();
        write_detection_stream(&mut text, &recs).unwrap();
        let parsed = parse_detection_stream(text.as_slice(), None).unwrap();
        prop_assert_eq!(&parsed, &recs);
        let mut again = Vec::new();
        write_detection_stream(&mut again, &parsed).unwrap();
        prop_assert_eq!(again, text);
    }

    #[test]
    fn phase_series_reserializes_byte_identically(probs in prop::collection::vec(0u32..=10_000, 1..200)) {
        let series = PhaseProbSeries::new(
            probs.iter().enumerate().map(|(f, &p)| (f as u64, p as f64 / 10_000.0)).collect(),
        );
        let csv = series.to_csv();
        let parsed = parse_phase_series(csv.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &series);
        prop_assert_eq!(parsed.to_csv(), csv);
    }

    #[test]
    fn corrupted_rle_is_rejected(frames in mask_frames(), extra in 1u32..5) {
        let mut bad = frames[0].clone();
        *bad.rle.last_mut().unwrap() += extra;
        let line = serde_json::to_string(&bad).unwrap();
        let err = parse_mask_stream(line.as_bytes()).unwrap_err();
        prop_assert!(matches!(err, IngestError::InvariantViolation { line: 1, .. }), "{err}");
    }

    #[test]
    fn out_of_range_detections_are_rejected(recs in detections(), which in 0usize..4) {
        let mut bad = recs[0];
        match which {
            0 => bad.confidence = 1.5,
            1 => bad.bbox.w = 0.0,
            2 => bad.bbox.x = -1.0,
            _ => bad.bbox.h = f64::NAN,
        }
        // A NaN serializes as null, which must fail to parse.
        let text = bad.to_json_line();
        prop_assert!(parse_detection_stream(text.as_bytes(), None).is_err());
    }

    #[test]
    fn decreasing_frames_are_rejected(recs in detections()) {
        prop_assume!(recs.last().unwrap().frame_index > 0);
        let last = *recs.last().unwrap();
        let mut bad = recs.clone();
        bad.push(DetectionRecord { frame_index: last.frame_index - 1, ..last });
        let mut text = Vec::new();
        write_detection_stream(&mut text, &bad).unwrap();
        prop_assert!(parse_detection_stream(text.as_slice(), None).is_err());
    }

    #[test]
    fn boxes_outside_the_frame_are_rejected(recs in detections()) {
        let max_x = recs.iter().map(|r| r.bbox.x + r.bbox.w).fold(0.0, f64::max);
        let max_y = recs.iter().map(|r| r.bbox.y + r.bbox.h).fold(0.0, f64::max);
        let mut text = Vec::new();
        write_detection_stream(&mut text, &recs).unwrap();
        let fits = (max_x.ceil() as u32, max_y.ceil() as u32);
        prop_assert!(parse_detection_stream(text.as_slice(), Some(fits)).is_ok());
        let tight = (max_x.ceil() as u32 - 1, max_y.ceil() as u32 - 1);
        prop_assert!(parse_detection_stream(text.as_slice(), Some(tight)).is_err());
    }
}
