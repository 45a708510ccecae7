use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde_json::json;

use ctcsk_core::ctc::beam_decode;
use ctcsk_core::metrics::percentile;
use ctcsk_core::online::{
    self, algorithmic_latency, run_online_ctc_baseline, ArgmaxCenterScorer, GeoMeanScorer,
    OnlineConfig, WindowScorer,
};
use ctcsk_core::prob::decode_prb;
use ctcsk_core::span::PredictionEvent;
use ctcsk_core::ProbMatrix;

use super::Ctx;
use crate::manifest::{events_file, load_manifest, load_videos, write_json, HypVideo, Hypotheses};
use crate::{CliError, DecodeOfflineArgs, DecodeOnlineArgs, ScorerArg};

struct DecodedVideo {
    video_id: String,
    events: Vec<PredictionEvent>,
    sequence: Vec<usize>,
    window_times_ms: Vec<f64>,
}

pub fn run_online(ctx: &Ctx, args: &DecodeOnlineArgs) -> Result<(), CliError> {
    let cfg = OnlineConfig {
        window: args.window,
        stride: args.stride,
        bag: args.bag,
        frame_period_ms: args.frame_ms,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    match (&args.input, &args.prb, args.stdin) {
        (Some(dir), None, false) => decode_corpus(ctx, args, &cfg, dir),
        (None, Some(file), false) => {
            let bytes = fs::read(file)
                .with_context(|| format!("reading {}", file.display()))
                .map_err(CliError::Data)?;
            decode_single(ctx, args, &cfg, &bytes)
        }
        (None, None, true) => {
            let mut bytes = Vec::new();
            std::io::stdin()
                .read_to_end(&mut bytes)
                .context("reading stdin")?;
            decode_single(ctx, args, &cfg, &bytes)
        }
        (None, None, false) => Err(CliError::Usage(
            "no input: pass --in DIR, --prb FILE, or --stdin".into(),
        )),
        _ => unreachable!("clap forbids combining input sources"),
    }
}

fn decode_one(
    video_id: &str,
    probs: &ProbMatrix,
    args: &DecodeOnlineArgs,
    cfg: &OnlineConfig,
    capture_timing: bool,
) -> Result<DecodedVideo, String> {
    if args.baseline_ctc {
        let sequence =
            run_online_ctc_baseline(probs, cfg, args.beam, args.post).map_err(|e| e.to_string())?;
        return Ok(DecodedVideo {
            video_id: video_id.to_string(),
            events: Vec::new(),
            sequence,
            window_times_ms: Vec::new(),
        });
    }
    let scorer: Box<dyn WindowScorer> = match args.scorer {
        ScorerArg::Geomean => Box::new(GeoMeanScorer::default()),
        ScorerArg::ArgmaxCenter => Box::new(ArgmaxCenterScorer),
    };
    let run = online::run_online(probs, scorer.as_ref(), cfg, capture_timing)
        .map_err(|e| e.to_string())?;
    Ok(DecodedVideo {
        video_id: video_id.to_string(),
        sequence: run.sequence(),
        events: run.events,
        window_times_ms: run.window_times_ms,
    })
}

fn decode_corpus(
    ctx: &Ctx,
    args: &DecodeOnlineArgs,
    cfg: &OnlineConfig,
    dir: &Path,
) -> Result<(), CliError> {
    let manifest = load_manifest(dir)?;
    let videos = load_videos(dir, &manifest)?;
    let capture_timing = !ctx.no_timing;

    let decoded: Vec<DecodedVideo> = videos
        .par_iter()
        .map(|video| decode_one(&video.video_id, &video.probs, args, cfg, capture_timing))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Data(anyhow::anyhow!(e)))?;

    let out_dir = args.out.clone().unwrap_or_else(|| dir.to_path_buf());
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(CliError::Data)?;

    let mut hyp_videos = Vec::with_capacity(decoded.len());
    let mut total_events = 0usize;
    let mut all_window_times = Vec::new();
    for video in &decoded {
        let path = events_file(&out_dir, &video.video_id);
        let mut buf = Vec::new();
        for event in &video.events {
            serde_json::to_writer(&mut buf, event).context("encoding event")?;
            buf.push(b'\n');
        }
        fs::write(&path, buf)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::Data)?;
        total_events += video.events.len();
        all_window_times.extend_from_slice(&video.window_times_ms);
        hyp_videos.push(HypVideo {
            video_id: video.video_id.clone(),
            glosses: video.sequence.clone(),
        });
    }
    write_json(
        &out_dir.join("hyp.json"),
        &Hypotheses { videos: hyp_videos },
    )?;

    let mut summary = json!({
        "videos": decoded.len(),
        "events": total_events,
        "al_ms": algorithmic_latency(cfg),
        "window": cfg.window,
        "stride": cfg.stride,
        "bag": cfg.bag,
        "out": out_dir.display().to_string(),
    });
    let mut human = vec![format!(
        "decoded {} videos: {} events, AL {} ms (W={}, S={}, B={}) -> {}",
        decoded.len(),
        total_events,
        algorithmic_latency(cfg),
        cfg.window,
        cfg.stride,
        cfg.bag,
        out_dir.display()
    )];
    if capture_timing && !all_window_times.is_empty() {
        all_window_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p50 = percentile(&all_window_times, 50.0);
        let p95 = percentile(&all_window_times, 95.0);
        summary["wpl_p50_ms"] = json!(p50);
        summary["wpl_p95_ms"] = json!(p95);
        human.push(format!("WPL p50 {p50:.4} ms, p95 {p95:.4} ms"));
    }
    ctx.emit(&summary, &human);
    Ok(())
}

fn decode_single(
    ctx: &Ctx,
    args: &DecodeOnlineArgs,
    cfg: &OnlineConfig,
    bytes: &[u8],
) -> Result<(), CliError> {
    let probs = decode_prb(bytes).context("decoding PRB1 stream")?;
    let capture_timing = !ctx.no_timing;
    let decoded = decode_one("stream", &probs, args, cfg, capture_timing)
        .map_err(|e| CliError::Data(anyhow::anyhow!(e)))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for event in &decoded.events {
        serde_json::to_writer(&mut out, event).context("writing event")?;
        out.write_all(b"\n").context("writing event")?;
    }
    let summary = json!({
        "frames": probs.frames(),
        "events": decoded.events.len(),
        "sequence": decoded.sequence,
        "al_ms": algorithmic_latency(cfg),
    });
    ctx.emit(
        &summary,
        &[format!(
            "stream of {} frames: {} events, AL {} ms",
            probs.frames(),
            decoded.events.len(),
            algorithmic_latency(cfg)
        )],
    );
    Ok(())
}

pub fn run_offline(ctx: &Ctx, args: &DecodeOfflineArgs) -> Result<(), CliError> {
    if args.beam < 1 {
        return Err(CliError::Usage("--beam must be at least 1".into()));
    }
    let manifest = load_manifest(&args.input)?;
    let videos = load_videos(&args.input, &manifest)?;

    let hyp_videos: Vec<HypVideo> = videos
        .par_iter()
        .map(|video| {
            let (glosses, _) = beam_decode(&video.probs, args.beam, None);
            HypVideo {
                video_id: video.video_id.clone(),
                glosses,
            }
        })
        .collect();

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.join("hyp_offline.json"));
    write_json(&out, &Hypotheses { videos: hyp_videos })?;

    let summary = json!({
        "videos": videos.len(),
        "beam": args.beam,
        "out": out.display().to_string(),
    });
    ctx.emit(
        &summary,
        &[format!(
            "offline-decoded {} videos (beam {}) -> {}",
            videos.len(),
            args.beam,
            out.display()
        )],
    );
    Ok(())
}
