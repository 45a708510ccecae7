use std::fs;
use std::io::Write;

use anyhow::Context;
use serde_json::json;

use ctcsk_core::metrics::{latency_report, wer, MetricsError, WerResult};
use ctcsk_core::online::OnlineConfig;
use ctcsk_core::span::PredictionEvent;

use super::Ctx;
use crate::manifest::{events_file, Hypotheses, Manifest};
use crate::{CliError, EvalArgs};

pub fn run(ctx: &Ctx, args: &EvalArgs) -> Result<(), CliError> {
    let manifest: Manifest = serde_json::from_str(
        &fs::read_to_string(&args.reference)
            .with_context(|| format!("reading {}", args.reference.display()))
            .map_err(CliError::Data)?,
    )
    .context("parsing reference manifest")?;
    let hyp: Hypotheses = serde_json::from_str(
        &fs::read_to_string(&args.hyp)
            .with_context(|| format!("reading {}", args.hyp.display()))
            .map_err(CliError::Data)?,
    )
    .context("parsing hypotheses")?;

    let mut per_video = Vec::with_capacity(manifest.videos.len());
    let mut agg = WerResult {
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        ref_len: 0,
    };
    let empty: Vec<usize> = Vec::new();
    for video in &manifest.videos {
        let glosses = hyp
            .videos
            .iter()
            .find(|h| h.video_id == video.video_id)
            .map(|h| &h.glosses)
            .unwrap_or(&empty);
        let result = wer(&video.glosses, glosses)
            .map_err(|e| CliError::Data(anyhow::anyhow!("{}: {e}", video.video_id)))?;
        agg.substitutions += result.substitutions;
        agg.deletions += result.deletions;
        agg.insertions += result.insertions;
        agg.ref_len += result.ref_len;
        per_video.push((video.video_id.clone(), result));
    }

    let latency = match &args.events {
        Some(dir) => {
            let mut events: Vec<PredictionEvent> = Vec::new();
            for video in &manifest.videos {
                let path = events_file(dir, &video.video_id);
                if !path.exists() {
                    continue;
                }
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(CliError::Data)?;
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    events.push(serde_json::from_str(line).context("parsing event")?);
                }
            }
            let cfg = OnlineConfig {
                window: args.window,
                frame_period_ms: args.frame_ms,
                ..OnlineConfig::default()
            };
            match latency_report(&events, &cfg) {
                Ok(report) => Some(report),
                Err(MetricsError::NoEvents) => {
                    return Err(CliError::Data(anyhow::anyhow!(
                        "no events found under {}",
                        dir.display()
                    )))
                }
                Err(e) => return Err(CliError::Data(anyhow::anyhow!(e))),
            }
        }
        None => None,
    };

    if let Some(csv_path) = &args.csv {
        let mut file = fs::File::create(csv_path)
            .with_context(|| format!("creating {}", csv_path.display()))
            .map_err(CliError::Data)?;
        writeln!(
            file,
            "video_id,wer,substitutions,deletions,insertions,ref_len"
        )
        .context("writing csv")?;
        for (video_id, r) in &per_video {
            writeln!(
                file,
                "{video_id},{:.6},{},{},{},{}",
                r.wer(),
                r.substitutions,
                r.deletions,
                r.insertions,
                r.ref_len
            )
            .context("writing csv")?;
        }
    }

    let videos_json: Vec<_> = per_video
        .iter()
        .map(|(id, r)| {
            json!({
                "video_id": id,
                "wer": r.wer(),
                "substitutions": r.substitutions,
                "deletions": r.deletions,
                "insertions": r.insertions,
                "ref_len": r.ref_len,
            })
        })
        .collect();
    let mut summary = json!({
        "corpus": {
            "wer": agg.wer(),
            "substitutions": agg.substitutions,
            "deletions": agg.deletions,
            "insertions": agg.insertions,
            "ref_len": agg.ref_len,
        },
        "videos": videos_json,
    });
    let mut human = vec![format!(
        "corpus WER {:.3} ({} S, {} D, {} I over {} reference glosses, {} videos)",
        agg.wer(),
        agg.substitutions,
        agg.deletions,
        agg.insertions,
        agg.ref_len,
        per_video.len()
    )];
    if let Some(report) = latency {
        summary["latency"] = serde_json::to_value(report).context("encoding latency")?;
        human.push(format!(
            "latency: AL {} ms, WPL p50 {:.4} / p95 {:.4} / max {:.4} ms",
            report.al_ms, report.wpl_p50_ms, report.wpl_p95_ms, report.wpl_max_ms
        ));
    }
    ctx.emit(&summary, &human);
    Ok(())
}
