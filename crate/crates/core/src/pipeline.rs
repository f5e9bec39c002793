//! Per-video orchestration and the batch study driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmetrics::{
    map_at_iou, mask_dice, mask_iou, orientation_error_summary, MeanAp, MetricsError,
    OrientationErrorSummary,
};
use crate::geometry::{build_track, GeometryError, Point};
use crate::hookpose::{
    filter_by_confidence, orientation, resolve_lens_center, select_hooks, HookError, Scenario,
    DEFAULT_CONF_THRESHOLD, DEFAULT_OPPOSITION_TOL_DEG,
};
use crate::ingest::{
    parse_detection_stream, parse_mask_stream, parse_phase_series, DetectionClass,
    DetectionRecord, IngestError, MaskFrame, MaskSequence, MaskStream, PhaseProbSeries,
};
use crate::kinematics::{
    compute_report, InstabilityMode, KinematicsError, ReportOptions, VideoReport,
    DEFAULT_SMOOTH_WINDOW,
};
use crate::phase::{classify_clips, locate_implantation_interval, ImplantationInterval, PhaseError};
use crate::stats::{run_study as run_stats, BrandSample, StatsError, StudyResult, TTestMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("stage phase: {0}")]
    Phase(#[from] PhaseError),
    #[error("stage geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("stage hookpose: {0}")]
    Hookpose(#[from] HookError),
    #[error("stage kinematics: {0}")]
    Kinematics(#[from] KinematicsError),
    #[error("stage stats: {0}")]
    Stats(#[from] StatsError),
    #[error("stage config: {0}")]
    Config(String),
    #[error("stage manifest: {0}")]
    Manifest(String),
    #[error("stage evalmetrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("need at least 2 brands with 3 usable videos, got {usable}")]
    InsufficientBrands { usable: usize },
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Ingest(_) => "ingest",
            PipelineError::Phase(_) => "phase",
            PipelineError::Geometry(_) => "geometry",
            PipelineError::Hookpose(_) => "hookpose",
            PipelineError::Kinematics(_) => "kinematics",
            PipelineError::Stats(_) | PipelineError::InsufficientBrands { .. } => "stats",
            PipelineError::Config(_) => "config",
            PipelineError::Manifest(_) => "manifest",
            PipelineError::Metrics(_) => "evalmetrics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub conf_threshold: f64,
    pub opposition_tol_deg: f64,
    pub phase_threshold: f64,
    pub smooth_window: usize,
    pub instability_mode: InstabilityMode,
    pub ttest_mode: TTestMode,
    pub coverage_min: f64,
    /// Worker threads for study runs; 0 uses every core.
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            opposition_tol_deg: DEFAULT_OPPOSITION_TOL_DEG,
            phase_threshold: crate::phase::DEFAULT_THRESHOLD,
            smooth_window: DEFAULT_SMOOTH_WINDOW,
            instability_mode: InstabilityMode::default(),
            ttest_mode: TTestMode::default(),
            coverage_min: 0.3,
            workers: 0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: Config = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.into()));
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return bad("conf_threshold must lie in [0, 1]");
        }
        if !(0.0..=180.0).contains(&self.opposition_tol_deg) {
            return bad("opposition_tol_deg must lie in [0, 180]");
        }
        if !(0.0..=1.0).contains(&self.phase_threshold) {
            return bad("phase_threshold must lie in [0, 1]");
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return bad("smooth_window must be odd and positive");
        }
        if !(0.0..=1.0).contains(&self.coverage_min) {
            return bad("coverage_min must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The three input streams of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoStreams {
    pub masks: MaskStream,
    pub detections: Vec<DetectionRecord>,
    pub phase: PhaseProbSeries,
}

/// Paths of one video's input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoInputs {
    pub masks: PathBuf,
    pub detections: PathBuf,
    pub phase: PathBuf,
}

impl VideoInputs {
    pub fn load(&self) -> Result<VideoStreams, PipelineError> {
        let open = |p: &Path| -> Result<BufReader<File>, PipelineError> {
            File::open(p).map(BufReader::new).map_err(|e| {
                PipelineError::Ingest(IngestError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", p.display()),
                )))
            })
        };
        let masks = parse_mask_stream(open(&self.masks)?)?;
        let detections = parse_detection_stream(open(&self.detections)?, masks.dimensions())?;
        let phase = parse_phase_series(open(&self.phase)?)?;
        Ok(VideoStreams {
            masks,
            detections,
            phase,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub zero_or_one: u64,
    pub pair: u64,
    pub clustered: u64,
}

/// Report of one video together with the intermediate results that
/// produced it and the configuration used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    #[serde(flatten)]
    pub report: VideoReport,
    pub implantation: ImplantationInterval,
    pub post_implantation_start_frame: u64,
    pub unfold_frame: u64,
    pub track_frames: usize,
    pub orientation_samples: usize,
    pub scenarios: ScenarioCounts,
    pub low_coverage: bool,
    pub config: Config,
}

/// Per-frame lens orientation from frame `start` on, with the number of
/// frames resolved by each hook scenario. `centroids` supplies the lens
/// centre where no lens box is detected.
pub fn orientation_track(
    detections: &[DetectionRecord],
    centroids: &BTreeMap<u64, Point>,
    start: u64,
    config: &Config,
) -> (Vec<(u64, f64)>, ScenarioCounts) {
    let mut by_frame: BTreeMap<u64, Vec<DetectionRecord>> = BTreeMap::new();
    for d in detections.iter().filter(|d| d.frame_index >= start) {
        by_frame.entry(d.frame_index).or_default().push(*d);
    }
    let frames: BTreeSet<u64> = by_frame
        .keys()
        .chain(centroids.range(start..).map(|(f, _)| f))
        .copied()
        .collect();

    let mut orientations = Vec::new();
    let mut scenarios = ScenarioCounts::default();
    let mut previous_center = None;
    for f in frames {
        let dets = by_frame.get(&f).map(Vec::as_slice).unwrap_or(&[]);
        let Some(center) = resolve_lens_center(dets, centroids.get(&f).copied(), previous_center) else {
            continue;
        };
        previous_center = Some(center);
        let hooks: Vec<DetectionRecord> = filter_by_confidence(dets, config.conf_threshold)
            .into_iter()
            .filter(|d| d.class == DetectionClass::Hook)
            .collect();
        if hooks.is_empty() {
            continue;
        }
        let selection = select_hooks(f, &hooks, center, config.opposition_tol_deg);
        match selection.scenario {
            Scenario::ZeroOrOne => scenarios.zero_or_one += 1,
            Scenario::Pair => scenarios.pair += 1,
            Scenario::Clustered => scenarios.clustered += 1,
        }
        // A hook box centred on the lens centre gives no direction.
        if let Ok(Some(sample)) = orientation(&selection, center) {
            orientations.push((sample.frame_index, sample.angle_deg));
        }
    }
    (orientations, scenarios)
}

/// Runs one video: phase localisation, mask geometry, hook selection and
/// the kinematic report.
pub fn run_video(streams: &VideoStreams, config: &Config) -> Result<AnalysisOutput, PipelineError> {
    config.validate()?;
    let labeling = classify_clips(&streams.phase, config.phase_threshold)?;
    let implantation = locate_implantation_interval(&labeling.labels)?;
    let start = implantation.post_implantation_start_frame;

    let track = build_track(&streams.masks.lens, &streams.masks.pupil, start)?;
    let centroids: BTreeMap<u64, Point> = track.iter().map(|g| (g.frame_index, g.lens_center)).collect();

    let (orientations, scenarios) = orientation_track(&streams.detections, &centroids, start, config);

    let options = ReportOptions {
        smooth_window: config.smooth_window,
        instability_mode: config.instability_mode,
    };
    let report = compute_report(&track, &orientations, start, &options)?;
    Ok(AnalysisOutput {
        report,
        implantation,
        post_implantation_start_frame: start,
        unfold_frame: start + report.t_u_frames,
        track_frames: track.len(),
        orientation_samples: orientations.len(),
        scenarios,
        low_coverage: report.coverage < config.coverage_min,
        config: config.clone(),
    })
}

/// Loads the three files and runs [`run_video`].
pub fn run_video_files(inputs: &VideoInputs, config: &Config) -> Result<AnalysisOutput, PipelineError> {
    run_video(&inputs.load()?, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrandEntry {
    pub name: String,
    pub videos: Vec<VideoInputs>,
}

/// Videos grouped by lens brand. Relative paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    pub brands: Vec<BrandEntry>,
}

impl StudyManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
        let mut manifest: StudyManifest =
            serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for brand in &mut manifest.brands {
            for v in &mut brand.videos {
                for p in [&mut v.masks, &mut v.detections, &mut v.phase] {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut seen = BTreeSet::new();
        for b in &self.brands {
            if !seen.insert(b.name.as_str()) {
                return Err(PipelineError::Manifest(format!("duplicate brand `{}`", b.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoOutcome {
    pub brand: String,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<AnalysisOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<VideoFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBrand {
    pub brand: String,
    pub usable_videos: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub result: StudyResult,
    pub excluded_brands: Vec<ExcludedBrand>,
    pub videos: Vec<VideoOutcome>,
    pub config: Config,
}

pub const MIN_USABLE_VIDEOS: usize = 3;

/// Study over any video representation. `analyze` maps one video to its
/// report; videos run concurrently on `config.workers` threads and results
/// are assembled in input order.
pub fn run_study_with<T, F>(
    brands: &[(String, Vec<T>)],
    config: &Config,
    analyze: F,
) -> Result<StudyOutput, PipelineError>
where
    T: Sync,
    F: Fn(&T) -> Result<AnalysisOutput, PipelineError> + Sync,
{
    config.validate()?;
    let mut names = BTreeSet::new();
    for (name, _) in brands {
        if !names.insert(name.as_str()) {
            return Err(PipelineError::Manifest(format!("duplicate brand `{name}`")));
        }
    }
    let jobs: Vec<(usize, usize)> = brands
        .iter()
        .enumerate()
        .flat_map(|(b, (_, videos))| (0..videos.len()).map(move |i| (b, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let results: Vec<Result<AnalysisOutput, PipelineError>> =
        pool.install(|| jobs.par_iter().map(|&(b, i)| analyze(&brands[b].1[i])).collect());

    let mut videos = Vec::with_capacity(jobs.len());
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    let mut it = results.into_iter();
    for (name, list) in brands {
        let mut sample = BrandSample {
            brand: name.clone(),
            unfolding: Vec::new(),
            instability: Vec::new(),
            rotation: Vec::new(),
        };
        for index in 0..list.len() {
            let outcome = it.next().expect("one result per job");
            let mut record = VideoOutcome {
                brand: name.clone(),
                index,
                source: None,
                report: None,
                failure: None,
            };
            match outcome {
                Ok(out) => {
                    sample.unfolding.push(out.report.t_u_seconds);
                    sample.instability.push(out.report.instability_px);
                    sample.rotation.push(out.report.rotation_deg);
                    record.report = Some(out);
                }
                Err(e) => {
                    record.failure = Some(VideoFailure {
                        stage: e.stage().into(),
                        message: e.to_string(),
                    })
                }
            }
            videos.push(record);
        }
        if sample.len() < MIN_USABLE_VIDEOS {
            excluded.push(ExcludedBrand {
                brand: name.clone(),
                usable_videos: sample.len(),
                reason: format!("fewer than {MIN_USABLE_VIDEOS} usable videos"),
            });
        } else {
            samples.push(sample);
        }
    }
    if samples.len() < 2 {
        return Err(PipelineError::InsufficientBrands { usable: samples.len() });
    }
    let result = run_stats(&samples, config.ttest_mode)?;
    Ok(StudyOutput {
        result,
        excluded_brands: excluded,
        videos,
        config: config.clone(),
    })
}

/// Study over the files listed in a manifest.
pub fn run_study(manifest: &StudyManifest, config: &Config) -> Result<StudyOutput, PipelineError> {
    manifest.validate()?;
    let brands: Vec<(String, Vec<VideoInputs>)> = manifest
        .brands
        .iter()
        .map(|b| (b.name.clone(), b.videos.clone()))
        .collect();
    let mut out = run_study_with(&brands, config, |v| run_video_files(v, config))?;
    let sources = brands.iter().flat_map(|(_, v)| v.iter().map(|v| v.masks.clone()));
    for (outcome, src) in out.videos.iter_mut().zip(sources) {
        outcome.source = Some(src);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub frames: usize,
    pub mean_iou: f64,
    pub mean_dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEvaluation {
    pub lens: Option<MaskScores>,
    pub pupil: Option<MaskScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvaluation {
    pub map: MeanAp,
    /// Frames where both streams yield an orientation.
    pub orientation_frames: usize,
    pub orientation: Option<OrientationErrorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    Masks(MaskEvaluation),
    Detections(DetectionEvaluation),
}

pub const EVAL_IOU_THRESHOLD: f64 = 0.5;

fn score_sequence(pred: &MaskSequence, gt: &MaskSequence) -> Result<Option<MaskScores>, PipelineError> {
    let Some((w, h)) = gt.dimensions().or(pred.dimensions()) else {
        return Ok(None);
    };
    let p: BTreeMap<u64, &MaskFrame> = pred.frames.iter().map(|m| (m.frame_index, m)).collect();
    let g: BTreeMap<u64, &MaskFrame> = gt.frames.iter().map(|m| (m.frame_index, m)).collect();
    let frames: BTreeSet<u64> = p.keys().chain(g.keys()).copied().collect();
    let (mut iou, mut dice) = (0.0, 0.0);
    for &f in &frames {
        // A frame missing from one side counts as an empty mask.
        let empty = MaskFrame::empty(f, gt.class, w, h);
        let a = p.get(&f).copied().unwrap_or(&empty);
        let b = g.get(&f).copied().unwrap_or(&empty);
        iou += mask_iou(a, b)?;
        dice += mask_dice(a, b)?;
    }
    let n = frames.len() as f64;
    Ok(Some(MaskScores {
        frames: frames.len(),
        mean_iou: iou / n,
        mean_dice: dice / n,
    }))
}

/// Mean per-frame IoU and Dice of each mask class over the union of frames.
pub fn evaluate_masks(pred: &MaskStream, gt: &MaskStream) -> Result<MaskEvaluation, PipelineError> {
    Ok(MaskEvaluation {
        lens: score_sequence(&pred.lens, &gt.lens)?,
        pupil: score_sequence(&pred.pupil, &gt.pupil)?,
    })
}

/// Box mAP at IoU 0.5 and the orientation error over frames where both
/// streams resolve a lens orientation.
pub fn evaluate_detections(
    pred: &[DetectionRecord],
    gt: &[DetectionRecord],
    config: &Config,
) -> Result<DetectionEvaluation, PipelineError> {
    config.validate()?;
    let map = map_at_iou(pred, gt, EVAL_IOU_THRESHOLD)?;
    let none = BTreeMap::new();
    let (p, _) = orientation_track(pred, &none, 0, config);
    let (g, _) = orientation_track(gt, &none, 0, config);
    let g: BTreeMap<u64, f64> = g.into_iter().collect();
    let (pa, ga): (Vec<f64>, Vec<f64>) = p
        .iter()
        .filter_map(|(f, a)| g.get(f).map(|b| (*a, *b)))
        .unzip();
    let orientation = if pa.is_empty() {
        None
    } else {
        Some(orientation_error_summary(&pa, &ga)?)
    };
    Ok(DetectionEvaluation {
        map,
        orientation_frames: pa.len(),
        orientation,
    })
}

fn first_record(path: &Path) -> Result<serde_json::Value, PipelineError> {
    let io_err = |e: std::io::Error| {
        PipelineError::Ingest(IngestError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let line = text.lines().find(|l| !l.trim().is_empty()).ok_or(IngestError::EmptySequence)?;
    serde_json::from_str(line).map_err(|e| {
        PipelineError::Ingest(IngestError::Parse {
            line: 1,
            message: e.to_string(),
        })
    })
}

/// Evaluates two streams of the same format. Mask streams are recognised
/// by their `rle` field, detection streams by `bbox`.
pub fn evaluate_files(pred: &Path, gt: &Path, config: &Config) -> Result<Evaluation, PipelineError> {
    let kind = |v: &serde_json::Value| {
        if v.get("rle").is_some() {
            Some(true)
        } else if v.get("bbox").is_some() {
            Some(false)
        } else {
            None
        }
    };
    let (pk, gk) = (kind(&first_record(pred)?), kind(&first_record(gt)?));
    let open = |p: &Path| {
        File::open(p).map(BufReader::new).map_err(|e| {
            PipelineError::Ingest(IngestError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", p.display()),
            )))
        })
    };
    match (pk, gk) {
        (Some(true), Some(true)) => {
            let p = parse_mask_stream(open(pred)?)?;
            let g = parse_mask_stream(open(gt)?)?;
            Ok(Evaluation::Masks(evaluate_masks(&p, &g)?))
        }
        (Some(false), Some(false)) => {
            let p = parse_detection_stream(open(pred)?, None)?;
            let g = parse_detection_stream(open(gt)?, None)?;
            Ok(Evaluation::Detections(evaluate_detections(&p, &g, config)?))
        }
        _ => Err(PipelineError::Config(
            "prediction and ground truth must both be mask streams or both detection streams".into(),
        )),
    }
}
