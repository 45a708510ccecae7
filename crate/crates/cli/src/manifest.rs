//! On-disk corpus layout shared by the subcommands.
//!
//! A corpus directory holds one `.prb` stream per video, a `vocab.json`
//! sidecar, and a `manifest.json` listing every video with its reference
//! glosses and (for synthetic corpora) the ground-truth spans. Decoders
//! write their outputs back as `hyp.json` plus one events file per video.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use ctcsk_core::prob::decode_prb;
use ctcsk_core::span::SignSpan;
use ctcsk_core::vocab::GlossVocab;
use ctcsk_core::ProbMatrix;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub eps: f64,
    pub frame_period_ms: f64,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub video_id: String,
    pub file: String,
    pub frames: usize,
    pub glosses: Vec<usize>,
    pub spans: Vec<SignSpan>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Hypotheses {
    pub videos: Vec<HypVideo>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HypVideo {
    pub video_id: String,
    pub glosses: Vec<usize>,
}

pub struct LoadedVideo {
    pub video_id: String,
    pub probs: ProbMatrix,
    pub glosses: Vec<usize>,
}

pub fn load_vocab(dir: &Path) -> Result<GlossVocab> {
    let path = dir.join(VOCAB_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_videos(dir: &Path, manifest: &Manifest) -> Result<Vec<LoadedVideo>> {
    manifest
        .videos
        .iter()
        .map(|video| {
            let path = dir.join(&video.file);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let probs =
                decode_prb(&bytes).with_context(|| format!("decoding {}", path.display()))?;
            Ok(LoadedVideo {
                video_id: video.video_id.clone(),
                probs,
                glosses: video.glosses.clone(),
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn events_file(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.events.jsonl"))
}
