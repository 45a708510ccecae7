use serde_json::json;

use ctcsk_core::objectives::{train_toy, SamplingMode, ToyTrainConfig};

use super::Ctx;
use crate::{CliError, SamplingArg, TrainToyArgs};

pub fn run(ctx: &Ctx, args: &TrainToyArgs) -> Result<(), CliError> {
    let cfg = ToyTrainConfig {
        glosses: args.glosses,
        m: args.m,
        k: args.k,
        epochs: args.epochs,
        lr: args.lr,
        seed: ctx.seed,
        saliency: !args.no_saliency,
        sampling: match args.sampling {
            SamplingArg::Gloss => SamplingMode::Gloss,
            SamplingArg::Instance => SamplingMode::Instance,
        },
        label_smoothing: args.label_smoothing,
        ..ToyTrainConfig::default()
    };
    let (_, report) = train_toy(&cfg).map_err(|e| match e {
        ctcsk_core::objectives::ToyError::Config(msg) => CliError::Usage(msg),
        other => CliError::Data(anyhow::anyhow!(other)),
    })?;

    // Per-epoch metrics stream as JSON lines regardless of output mode.
    for epoch in &report.epochs {
        println!(
            "{}",
            json!({"epoch": epoch.epoch, "mean_loss": epoch.mean_loss})
        );
    }

    let summary = json!({
        "epochs": report.epochs.len(),
        "holdout_accuracy": report.holdout_accuracy,
        "holdout_macro_accuracy": report.holdout_macro_accuracy,
        "holdout_windows": report.holdout_windows,
        "glosses": args.glosses,
        "m": args.m,
        "k": args.k,
        "saliency": !args.no_saliency,
    });
    ctx.emit(
        &summary,
        &[format!(
            "trained {} epochs: holdout accuracy {:.4} (macro {:.4}) over {} windows",
            report.epochs.len(),
            report.holdout_accuracy,
            report.holdout_macro_accuracy,
            report.holdout_windows
        )],
    );
    Ok(())
}
