use std::fs;
use std::io::BufWriter;

use anyhow::Context;
use serde_json::json;

use ctcsk_core::dict::{build_dictionary, AugmentStrategy, BuildConfig, CorpusItem, Segmentor};

use super::Ctx;
use crate::manifest::{load_manifest, load_videos, load_vocab};
use crate::{AugmentArg, BuildDictArgs, CliError, SegmentorArg};

pub fn run(ctx: &Ctx, args: &BuildDictArgs) -> Result<(), CliError> {
    let augment = match args.augment {
        AugmentArg::Center => {
            if args.window < 2 || !args.window.is_multiple_of(2) {
                return Err(CliError::Usage(
                    "--window must be even and >= 2 for centered augmentation".into(),
                ));
            }
            AugmentStrategy::Center
        }
        AugmentArg::Iou => {
            if !(args.gamma > 0.0 && args.gamma <= 1.0) {
                return Err(CliError::Usage("--gamma must be in (0, 1]".into()));
            }
            AugmentStrategy::Iou { gamma: args.gamma }
        }
        AugmentArg::None => AugmentStrategy::None,
    };
    if !(0.0..=100.0).contains(&args.bg_percent) {
        return Err(CliError::Usage("--bg-percent must be in [0, 100]".into()));
    }

    let manifest = load_manifest(&args.input)?;
    let vocab = load_vocab(&args.input)?;
    let videos = load_videos(&args.input, &manifest)?;
    let items: Vec<CorpusItem> = videos
        .into_iter()
        .map(|v| CorpusItem {
            video_id: v.video_id,
            probs: v.probs,
            glosses: v.glosses,
        })
        .collect();

    let segmentor = match args.segmentor {
        SegmentorArg::Ctc => Segmentor::ForcedAlign,
        SegmentorArg::Equal => Segmentor::EqualPartition,
    };
    let cfg = BuildConfig {
        window: args.window,
        augment,
        bg_percent: args.bg_percent,
        seed: ctx.seed,
    };
    let outcome =
        build_dictionary(vocab, &items, segmentor, &cfg).context("building dictionary")?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.join("dict.jsonl"));
    let file = fs::File::create(&out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::Data)?;
    outcome
        .dictionary
        .write_jsonl(BufWriter::new(file))
        .context("writing dictionary")?;

    let skipped: Vec<_> = outcome
        .skipped
        .iter()
        .map(|s| json!({"video_id": s.video_id, "reason": s.reason}))
        .collect();
    let summary = json!({
        "glosses": outcome.dictionary.n_glosses(),
        "pseudo_gt": outcome.pseudo_gt,
        "augmented": outcome.augmented,
        "background": outcome.background,
        "total_instances": outcome.dictionary.total_instances(),
        "skipped": skipped,
        "out": out.display().to_string(),
    });
    ctx.emit(
        &summary,
        &[format!(
            "dictionary: {} glosses, {} pseudo-GT + {} augmented instances ({} background) -> {}",
            outcome.dictionary.n_glosses(),
            outcome.pseudo_gt,
            outcome.augmented,
            outcome.background,
            out.display()
        )],
    );
    Ok(())
}
