use std::fs;

use anyhow::Context;
use serde_json::json;

use ctcsk_core::prob::encode_prb;
use ctcsk_core::sim::{gen_corpus_with, make_vocab, StreamSpec};

use super::Ctx;
use crate::manifest::{write_json, Manifest, ManifestVideo, MANIFEST_FILE, VOCAB_FILE};
use crate::{CliError, SimulateArgs};

pub fn run(ctx: &Ctx, args: &SimulateArgs) -> Result<(), CliError> {
    let signs = parse_signs(&args.signs)?;
    if args.vocab < 1 {
        return Err(CliError::Usage("--vocab must be at least 1".into()));
    }
    if args.videos < 1 {
        return Err(CliError::Usage("--videos must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&args.eps) {
        return Err(CliError::Usage("--eps must be in [0, 1)".into()));
    }
    if args.dur_min < 1 || args.dur_min > args.dur_max || args.gap_min > args.gap_max {
        return Err(CliError::Usage("bad duration or gap range".into()));
    }

    let spec = StreamSpec {
        vocab_size: args.vocab,
        num_signs: signs.0,
        duration: (args.dur_min, args.dur_max),
        gap: (args.gap_min, args.gap_max),
        eps: args.eps,
        boundary_blur: args.blur,
        seed: ctx.seed,
    };
    let corpus = gen_corpus_with(&spec, args.videos, signs);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::Data)?;
    write_json(&args.out.join(VOCAB_FILE), &make_vocab(args.vocab))?;

    let mut videos = Vec::with_capacity(corpus.len());
    let mut total_frames = 0usize;
    for video in &corpus {
        let file = format!("{}.prb", video.video_id);
        fs::write(args.out.join(&file), encode_prb(&video.probs))
            .with_context(|| format!("writing {file}"))
            .map_err(CliError::Data)?;
        total_frames += video.truth.frames;
        videos.push(ManifestVideo {
            video_id: video.video_id.clone(),
            file,
            frames: video.truth.frames,
            glosses: video.truth.glosses.clone(),
            spans: video.truth.spans.clone(),
        });
    }
    let manifest = Manifest {
        seed: ctx.seed,
        eps: args.eps,
        frame_period_ms: args.frame_ms,
        videos,
    };
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;

    let summary = json!({
        "videos": corpus.len(),
        "vocab": args.vocab,
        "total_frames": total_frames,
        "eps": args.eps,
        "seed": ctx.seed,
        "out": args.out.display().to_string(),
    });
    ctx.emit(
        &summary,
        &[format!(
            "wrote {} videos ({} frames, vocab {}) to {}",
            corpus.len(),
            total_frames,
            args.vocab,
            args.out.display()
        )],
    );
    Ok(())
}

/// Parses `N` or `LO-HI` into an inclusive range.
fn parse_signs(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--signs expects N or LO-HI, got `{text}`"));
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo < 1 || lo > hi {
            return Err(bad());
        }
        Ok((lo, hi))
    } else {
        let n: usize = text.trim().parse().map_err(|_| bad())?;
        if n < 1 {
            return Err(bad());
        }
        Ok((n, n))
    }
}
