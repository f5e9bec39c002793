//! Interchange formats between detector/segmenter backends and the analysis core.
//!
//! Three newline-oriented streams are supported:
//!
//! * `masks.jsonl`: `{"frame":0,"class":"lens","w":320,"h":240,"rle":[...]}`
//! * `detections.jsonl`: `{"frame":0,"class":"hook","bbox":[x,y,w,h],"conf":0.9}`
//! * `phase.csv`: header `frame,prob`, one row per frame.
//!
//! Masks are run-length encoded in row-major order, background first. A
//! leading `0` run means the mask starts with foreground. Parsers validate
//! every record and never repair input.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame rate every stream is assumed to be sampled at.
pub const FPS: f64 = 25.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("rle covers {actual} pixels but a {width}x{height} mask has {expected}")]
    LengthMismatch {
        width: u32,
        height: u32,
        expected: u64,
        actual: u64,
    },
    #[error("bitmap has {actual} cells, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invariant violated: {constraint}")]
    InvariantViolation { line: usize, constraint: String },
    #[error("stream contains no records")]
    EmptySequence,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskClass {
    Lens,
    Pupil,
}

impl fmt::Display for MaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskClass::Lens => f.write_str("lens"),
            MaskClass::Pupil => f.write_str("pupil"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionClass {
    Lens,
    Hook,
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionClass::Lens => f.write_str("lens"),
            DetectionClass::Hook => f.write_str("hook"),
        }
    }
}

/// Row-major boolean image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    pub cells: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.cells[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let idx = y as usize * self.width as usize + x as usize;
        self.cells[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Horizontal foreground run on a single row, `x_end` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpan {
    pub y: u32,
    pub x_start: u32,
    pub x_end: u32,
}

impl RowSpan {
    pub fn len(&self) -> u32 {
        self.x_end - self.x_start
    }

    pub fn is_empty(&self) -> bool {
        self.x_end == self.x_start
    }
}

/// One binary segmentation mask for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFrame {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "class")]
    pub class: MaskClass,
    #[serde(rename = "w")]
    pub width: u32,
    #[serde(rename = "h")]
    pub height: u32,
    pub rle: Vec<u32>,
}

impl MaskFrame {
    /// Builds a frame from foreground spans. Spans must be sorted row-major
    /// and non-overlapping; adjacent spans are merged.
    pub fn from_spans(
        frame_index: u64,
        class: MaskClass,
        width: u32,
        height: u32,
        spans: &[RowSpan],
    ) -> Self {
        let total = width as u64 * height as u64;
        let mut rle = Vec::with_capacity(spans.len() * 2 + 1);
        let mut cursor = 0u64;
        let mut pending: Option<(u64, u64)> = None;
        let flush = |start: u64, end: u64, cursor: &mut u64, rle: &mut Vec<u32>| {
            rle.push((start - *cursor) as u32);
            rle.push((end - start) as u32);
            *cursor = end;
        };
        for span in spans.iter().filter(|s| !s.is_empty()) {
            let start = span.y as u64 * width as u64 + span.x_start as u64;
            let end = span.y as u64 * width as u64 + span.x_end as u64;
            pending = match pending {
                Some((s, e)) if e == start => Some((s, end)),
                Some((s, e)) => {
                    flush(s, e, &mut cursor, &mut rle);
                    Some((start, end))
                }
                None => Some((start, end)),
            };
        }
        if let Some((s, e)) = pending {
            flush(s, e, &mut cursor, &mut rle);
        }
        if cursor < total || rle.is_empty() {
            rle.push((total - cursor) as u32);
        }
        Self {
            frame_index,
            class,
            width,
            height,
            rle,
        }
    }

    pub fn empty(frame_index: u64, class: MaskClass, width: u32, height: u32) -> Self {
        Self::from_spans(frame_index, class, width, height, &[])
    }

    /// Checks the record-level invariants, returning the violated constraint.
    pub fn check(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("w and h must be positive".into());
        }
        if self.rle.is_empty() {
            return Err("rle must be non-empty".into());
        }
        if let Some(pos) = self.rle.iter().skip(1).position(|&r| r == 0) {
            return Err(format!("rle run {} is zero; only the first run may be zero", pos + 1));
        }
        let sum: u64 = self.rle.iter().map(|&r| r as u64).sum();
        let expected = self.width as u64 * self.height as u64;
        if sum != expected {
            return Err(format!("sum(rle) = {sum} but w*h = {expected}"));
        }
        Ok(())
    }

    pub fn decode(&self) -> Result<Bitmap, IngestError> {
        decode_rle(&self.rle, self.width, self.height)
    }

    /// Foreground spans in row-major order, split at row boundaries.
    pub fn row_spans(&self) -> Vec<RowSpan> {
        let width = self.width as u64;
        let mut spans = Vec::new();
        let mut pos = 0u64;
        for (i, &run) in self.rle.iter().enumerate() {
            let run = run as u64;
            if i % 2 == 1 {
                let mut start = pos;
                let end = pos + run;
                while start < end {
                    let y = start / width;
                    let row_end = ((y + 1) * width).min(end);
                    spans.push(RowSpan {
                        y: y as u32,
                        x_start: (start - y * width) as u32,
                        x_end: (row_end - y * width) as u32,
                    });
                    start = row_end;
                }
            }
            pos += run;
        }
        spans
    }

    pub fn foreground_count(&self) -> u64 {
        self.rle.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground_count() == 0
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("mask frame serializes")
    }
}

/// Expands background-first, row-major run lengths into a bitmap.
pub fn decode_rle(rle: &[u32], width: u32, height: u32) -> Result<Bitmap, IngestError> {
    let expected = width as u64 * height as u64;
    let actual: u64 = rle.iter().map(|&r| r as u64).sum();
    if actual != expected {
        return Err(IngestError::LengthMismatch {
            width,
            height,
            expected,
            actual,
        });
    }
    let mut cells = Vec::with_capacity(expected as usize);
    for (i, &run) in rle.iter().enumerate() {
        cells.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
    }
    Ok(Bitmap {
        width,
        height,
        cells,
    })
}

/// Canonical run lengths of a bitmap: zero only as a leading run.
pub fn encode_rle(cells: &[bool], width: u32, height: u32) -> Result<Vec<u32>, IngestError> {
    let expected = width as usize * height as usize;
    if cells.len() != expected {
        return Err(IngestError::SizeMismatch {
            expected,
            actual: cells.len(),
        });
    }
    let mut rle = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &c in cells {
        if c != current {
            rle.push(run);
            run = 0;
            current = c;
        }
        run += 1;
    }
    if run > 0 || rle.is_empty() {
        rle.push(run);
    }
    Ok(rle)
}

/// Masks of one class, ordered by strictly increasing frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    pub class: MaskClass,
    pub frames: Vec<MaskFrame>,
}

impl MaskSequence {
    pub fn new(class: MaskClass) -> Self {
        Self {
            class,
            frames: Vec::new(),
        }
    }

    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| (f.width, f.height))
    }
}

/// Both mask sequences of one `masks.jsonl` stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStream {
    pub lens: MaskSequence,
    pub pupil: MaskSequence,
}

impl MaskStream {
    pub fn get(&self, class: MaskClass) -> &MaskSequence {
        match class {
            MaskClass::Lens => &self.lens,
            MaskClass::Pupil => &self.pupil,
        }
    }

    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.lens.dimensions().or_else(|| self.pupil.dimensions())
    }
}

/// Parses a `masks.jsonl` stream. Frame indices must be strictly increasing
/// within each class and every frame must share the same dimensions.
pub fn parse_mask_stream<R: BufRead>(reader: R) -> Result<MaskStream, IngestError> {
    let mut stream = MaskStream {
        lens: MaskSequence::new(MaskClass::Lens),
        pupil: MaskSequence::new(MaskClass::Pupil),
    };
    let mut dims: Option<(u32, u32)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: MaskFrame = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        frame.check().map_err(|constraint| IngestError::InvariantViolation {
            line: line_no,
            constraint,
        })?;
        match dims {
            Some((w, h)) if (w, h) != (frame.width, frame.height) => {
                return Err(IngestError::InvariantViolation {
                    line: line_no,
                    constraint: format!(
                        "all frames must share dimensions {w}x{h}, got {}x{}",
                        frame.width, frame.height
                    ),
                });
            }
            _ => dims = Some((frame.width, frame.height)),
        }
        let seq = match frame.class {
            MaskClass::Lens => &mut stream.lens,
            MaskClass::Pupil => &mut stream.pupil,
        };
        if let Some(prev) = seq.frames.last() {
            if frame.frame_index <= prev.frame_index {
                return Err(IngestError::InvariantViolation {
                    line: line_no,
                    constraint: format!(
                        "{} frame index {} does not increase past {}",
                        frame.class, frame.frame_index, prev.frame_index
                    ),
                });
            }
        }
        seq.frames.push(frame);
    }
    if dims.is_none() {
        return Err(IngestError::EmptySequence);
    }
    Ok(stream)
}

/// Writes frames as canonical `masks.jsonl` lines.
pub fn write_mask_stream<'a, W, I>(mut writer: W, frames: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a MaskFrame>,
{
    for frame in frames {
        writeln!(writer, "{}", frame.to_json_line())?;
    }
    Ok(())
}

/// Axis-aligned box, top-left origin, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "class")]
    pub class: DetectionClass,
    pub bbox: BBox,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn check(&self, bounds: Option<(u32, u32)>) -> Result<(), String> {
        let b = &self.bbox;
        if ![b.x, b.y, b.w, b.h, self.confidence].iter().all(|v| v.is_finite()) {
            return Err("bbox and conf must be finite".into());
        }
        if b.w <= 0.0 || b.h <= 0.0 {
            return Err(format!("bbox w and h must be positive, got {} x {}", b.w, b.h));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("conf {} outside [0, 1]", self.confidence));
        }
        if b.x < 0.0 || b.y < 0.0 {
            return Err(format!("bbox origin ({}, {}) is negative", b.x, b.y));
        }
        if let Some((w, h)) = bounds {
            if b.x + b.w > w as f64 || b.y + b.h > h as f64 {
                return Err(format!("bbox exceeds the {w}x{h} frame"));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("detection serializes")
    }
}

/// Parses a `detections.jsonl` stream. Several records may share a frame
/// but frame indices must never decrease. When `bounds` is given every
/// box must lie inside a frame of that size.
pub fn parse_detection_stream<R: BufRead>(
    reader: R,
    bounds: Option<(u32, u32)>,
) -> Result<Vec<DetectionRecord>, IngestError> {
    let mut records: Vec<DetectionRecord> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.check(bounds)
            .map_err(|constraint| IngestError::InvariantViolation {
                line: line_no,
                constraint,
            })?;
        if let Some(prev) = records.last() {
            if rec.frame_index < prev.frame_index {
                return Err(IngestError::InvariantViolation {
                    line: line_no,
                    constraint: format!(
                        "frame index {} precedes {}",
                        rec.frame_index, prev.frame_index
                    ),
                });
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(IngestError::EmptySequence);
    }
    Ok(records)
}

pub fn write_detection_stream<'a, W, I>(mut writer: W, records: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a DetectionRecord>,
{
    for rec in records {
        writeln!(writer, "{}", rec.to_json_line())?;
    }
    Ok(())
}

/// Per-frame implantation-phase probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProbSeries {
    pub fps: f64,
    pub entries: Vec<(u64, f64)>,
}

impl PhaseProbSeries {
    pub fn new(entries: Vec<(u64, f64)>) -> Self {
        Self { fps: FPS, entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of frames spanned, counting from frame 0.
    pub fn frame_count(&self) -> u64 {
        self.entries.last().map_or(0, |&(f, _)| f + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,prob\n");
        for &(frame, prob) in &self.entries {
            out.push_str(&format!("{frame},{prob}\n"));
        }
        out
    }
}

const PHASE_HEADER: &str = "frame,prob";

pub fn parse_phase_series<R: BufRead>(reader: R) -> Result<PhaseProbSeries, IngestError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(IngestError::EmptySequence),
        }
    };
    if header.trim() != PHASE_HEADER {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("expected header `{PHASE_HEADER}`, got `{}`", header.trim()),
        });
    }
    let mut entries: Vec<(u64, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse {
            line: line_no,
            message,
        };
        let (frame, prob) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected two fields, got `{line}`")))?;
        let frame: u64 = frame
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad frame `{frame}`: {e}")))?;
        let prob: f64 = prob
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad prob `{prob}`: {e}")))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(IngestError::InvariantViolation {
                line: line_no,
                constraint: format!("prob {prob} outside [0, 1]"),
            });
        }
        if let Some(&(prev, _)) = entries.last() {
            if frame <= prev {
                return Err(IngestError::InvariantViolation {
                    line: line_no,
                    constraint: format!("frame index {frame} does not increase past {prev}"),
                });
            }
        }
        entries.push((frame, prob));
    }
    if entries.is_empty() {
        return Err(IngestError::EmptySequence);
    }
    Ok(PhaseProbSeries::new(entries))
}
