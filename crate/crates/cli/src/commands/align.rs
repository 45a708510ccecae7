use std::fs;
use std::io::BufWriter;

use anyhow::Context;
use rayon::prelude::*;
use serde_json::json;

use ctcsk_core::ctc;
use ctcsk_core::dict::equal_partition_segment;
use ctcsk_core::span::{Dictionary, SignSpan, SpanKind};

use super::Ctx;
use crate::manifest::{load_manifest, load_videos, load_vocab, LoadedVideo};
use crate::{AlignArgs, CliError, SegmentorArg};

/// Per-video segmentation outcome, order-preserving under parallelism.
type VideoSpans = Result<Vec<SignSpan>, String>;

pub fn run(ctx: &Ctx, args: &AlignArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&args.input)?;
    let vocab = load_vocab(&args.input)?;
    let videos = load_videos(&args.input, &manifest)?;

    let results: Vec<VideoSpans> = videos
        .par_iter()
        .map(|video| segment_video(video, args.segmentor))
        .collect();

    let mut dictionary = Dictionary::new(vocab);
    let mut skipped = Vec::new();
    for (video, result) in videos.iter().zip(results) {
        match result {
            Ok(spans) => {
                for span in spans {
                    dictionary
                        .insert(span, SpanKind::PseudoGt, None)
                        .context("inserting span")?;
                }
            }
            Err(reason) => skipped.push(json!({
                "video_id": video.video_id,
                "reason": reason,
            })),
        }
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.join("alignment.jsonl"));
    let file = fs::File::create(&out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::Data)?;
    dictionary
        .write_jsonl(BufWriter::new(file))
        .context("writing alignment")?;

    let total_spans: usize = dictionary
        .glosses()
        .map(|g| dictionary.instances(g).len())
        .sum();
    let summary = json!({
        "videos": videos.len(),
        "aligned": videos.len() - skipped.len(),
        "skipped": skipped,
        "glosses": dictionary.n_glosses(),
        "spans": total_spans,
        "out": out.display().to_string(),
    });
    ctx.emit(
        &summary,
        &[format!(
            "aligned {}/{} videos into {} spans over {} glosses -> {}",
            videos.len() - summary["skipped"].as_array().unwrap().len(),
            videos.len(),
            total_spans,
            dictionary.n_glosses(),
            out.display()
        )],
    );
    Ok(())
}

pub(crate) fn segment_video(video: &LoadedVideo, segmentor: SegmentorArg) -> VideoSpans {
    match segmentor {
        SegmentorArg::Ctc => ctc::forced_align(&video.probs, &video.glosses)
            .map(|path| ctc::path_to_spans(&path, &video.video_id))
            .map_err(|e| e.to_string()),
        SegmentorArg::Equal => {
            equal_partition_segment(&video.video_id, video.probs.frames(), &video.glosses)
                .map_err(|e| e.to_string())
        }
    }
}
