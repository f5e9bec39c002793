use std::fs;
use std::path::Path;

use iolkin::pipeline::{
    run_study, run_video_files, Config, PipelineError, StudyManifest, VideoInputs,
};
use iolkin::stats::Metric;
use iolkin::synth::{generate_study, BrandSpec, NormalParam, StudySpec, MANIFEST_FILE};
use tempfile::TempDir;

fn brand(name: &str, n: usize, rotation: f64) -> BrandSpec {
    BrandSpec {
        name: name.into(),
        n_videos: n,
        rotation_deg: NormalParam { mean: rotation, sd: 1.5 },
        unfold_peak_frames: NormalParam { mean: 120.0, sd: 25.0 },
        drift_speed_px: NormalParam { mean: 0.8, sd: 0.15 },
    }
}

fn study_spec() -> StudySpec {
    StudySpec {
        seed: 21,
        brands: vec![brand("Left", 4, 8.0), brand("Right", 4, 35.0)],
        noise: Default::default(),
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generated_study_runs_from_files() {
    let tmp = TempDir::new().unwrap();
    generate_study(&study_spec(), tmp.path()).unwrap();
    let manifest = StudyManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap();
    let out = run_study(&manifest, &Config::default()).unwrap();

    assert_eq!(out.result.brands, ["Left", "Right"]);
    assert!(out.excluded_brands.is_empty());
    assert_eq!(out.videos.len(), 8);
    assert!(out.videos.iter().all(|v| v.report.is_some() && v.source.is_some()));
    let p = out.result.ttest_table(Metric::Rotation).p("Left", "Right").unwrap();
    assert!(p < 0.01, "rotation p = {p}");
}

#[test]
fn generation_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    generate_study(&study_spec(), a.path()).unwrap();
    generate_study(&study_spec(), b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert!(!ta.is_empty());
    assert!(ta == tb, "study trees differ");
}

#[test]
fn analysis_is_deterministic_and_order_free() {
    let tmp = TempDir::new().unwrap();
    generate_study(&study_spec(), tmp.path()).unwrap();
    let manifest = StudyManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap();
    let config = Config::default();

    let v = &manifest.brands[0].videos[0];
    assert_eq!(run_video_files(v, &config).unwrap(), run_video_files(v, &config).unwrap());

    let forward = run_study(&manifest, &config).unwrap().result;
    let mut reversed = manifest.clone();
    reversed.brands.reverse();
    for b in &mut reversed.brands {
        b.videos.reverse();
    }
    let backward = run_study(&reversed, &Config { workers: 2, ..config }).unwrap().result;

    assert_eq!(forward.brands, backward.brands);
    assert_eq!(forward.boxplots, backward.boxplots);
    for (a, b) in forward.pearson.iter().zip(&backward.pearson) {
        assert_eq!(a.brand, b.brand);
        match (a.r, b.r) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
            (x, y) => assert_eq!(x, y),
        }
    }
    for (a, b) in forward.ttests.iter().zip(&backward.ttests) {
        for (ra, rb) in a.p_value.iter().zip(&b.p_value) {
            for (x, y) in ra.iter().zip(rb) {
                match (x, y) {
                    (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * x.max(1e-300)),
                    (None, None) => {}
                    _ => panic!("tables disagree on applicability"),
                }
            }
        }
    }
}

#[test]
fn failing_brand_is_excluded_and_recorded() {
    let tmp = TempDir::new().unwrap();
    let spec = StudySpec {
        brands: vec![brand("Left", 3, 8.0), brand("Right", 3, 35.0), brand("Broken", 3, 20.0)],
        ..study_spec()
    };
    generate_study(&spec, tmp.path()).unwrap();
    let flat: String = (0..600).map(|f| format!("{f},0.02\n")).collect();
    let flat_path = tmp.path().join("flat.csv");
    fs::write(&flat_path, format!("frame,prob\n{flat}")).unwrap();

    let mut manifest = StudyManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap();
    for v in &mut manifest.brands[2].videos {
        v.phase = flat_path.clone();
    }
    let out = run_study(&manifest, &Config::default()).unwrap();
    assert_eq!(out.result.brands, ["Left", "Right"]);
    assert_eq!(out.excluded_brands.len(), 1);
    assert_eq!(out.excluded_brands[0].brand, "Broken");
    assert_eq!(out.excluded_brands[0].usable_videos, 0);
    let failures: Vec<_> = out.videos.iter().filter_map(|v| v.failure.as_ref()).collect();
    assert_eq!(failures.len(), 3);
    assert!(failures.iter().all(|f| f.stage == "phase"));

    manifest.brands.truncate(1);
    manifest.brands.push(iolkin::pipeline::BrandEntry {
        name: "Missing".into(),
        videos: vec![VideoInputs {
            masks: tmp.path().join("nope.jsonl"),
            detections: tmp.path().join("nope.jsonl"),
            phase: tmp.path().join("nope.csv"),
        }],
    });
    let err = run_study(&manifest, &Config::default()).unwrap_err();
    assert!(matches!(err, PipelineError::InsufficientBrands { usable: 1 }), "{err}");
}

#[test]
fn duplicate_brands_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join(MANIFEST_FILE);
    fs::write(&path, r#"{"brands": [{"name": "A", "videos": []}, {"name": "A", "videos": []}]}"#).unwrap();
    let err = StudyManifest::load(&path).unwrap_err();
    assert_eq!(err.stage(), "manifest");
}
