use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use iolkin::pipeline::{evaluate_files, run_study, run_video_files, Config, StudyManifest, VideoInputs};
use iolkin::synth::{generate_study, generate_video, StudySpec, SynthSpec};

#[derive(Parser)]
#[command(name = "iolkin", version, about = "Intraocular lens kinematics from surgery video streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute unfolding delay, instability and rotation for one video.
    Analyze {
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        phase: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross-brand study over a manifest of videos.
    Study {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render synthetic streams from a video or study spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted masks or detections against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Config::from_json(&text)?)
        }
    }
}

/// Writes next to the target and renames, so a failed run leaves no
/// partial file behind.
fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn synth(spec: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let value: Value = serde_json::from_str(&text).context("spec is not valid JSON")?;
    if value.get("brands").is_some() {
        let study: StudySpec = serde_json::from_value(value).context("invalid study spec")?;
        let manifest = generate_study(&study, out)?;
        let videos: usize = manifest.brands.iter().map(|b| b.videos.len()).sum();
        eprintln!("wrote {} brands, {videos} videos to {}", manifest.brands.len(), out.display());
    } else {
        let spec: SynthSpec = serde_json::from_value(value).context("invalid video spec")?;
        let video = generate_video(&spec)?;
        video.write_to(out)?;
        eprintln!("wrote {} frames to {}", spec.n_frames, out.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze {
            masks,
            detections,
            phase,
            config,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let inputs = VideoInputs {
                masks,
                detections,
                phase,
            };
            let report = run_video_files(&inputs, &config)?;
            write_json(&out, &report)
        }
        Command::Study { manifest, config, out } => {
            let config = load_config(config.as_deref())?;
            let manifest = StudyManifest::load(&manifest)?;
            let result = run_study(&manifest, &config)?;
            for v in &result.videos {
                let Some(f) = &v.failure else { continue };
                eprintln!("warning: {} video {} failed: {}", v.brand, v.index, f.message);
            }
            for b in &result.excluded_brands {
                eprintln!("warning: brand {} excluded: {}", b.brand, b.reason);
            }
            write_json(&out, &result)
        }
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Eval {
            pred,
            gt,
            config,
            out,
        } => {
            let config = load_config(config.as_deref())?;
            let eval = evaluate_files(&pred, &gt, &config)?;
            write_json(&out, &eval)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
