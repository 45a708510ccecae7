use serde_json::json;

use ctcsk_core::metrics::percentile;
use ctcsk_core::online::{
    algorithmic_latency, run_online, ArgmaxCenterScorer, GeoMeanScorer, OnlineConfig, WindowScorer,
};
use ctcsk_core::sim::{gen_stream, StreamSpec};

use super::Ctx;
use crate::{BenchArgs, CliError, ScorerArg};

pub fn run(ctx: &Ctx, args: &BenchArgs) -> Result<(), CliError> {
    let cfg = OnlineConfig {
        window: args.window,
        stride: args.stride,
        bag: args.bag,
        frame_period_ms: args.frame_ms,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.iters < 1 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }

    // Size the stream by frame count: keep emitting signs until the target
    // length is reached.
    let avg_per_sign = 16 + 5;
    let spec = StreamSpec {
        vocab_size: args.vocab,
        num_signs: (args.frames / avg_per_sign).max(1),
        eps: 0.1,
        seed: ctx.seed,
        ..StreamSpec::default()
    };
    let (probs, _) = gen_stream(&spec, "bench");
    let scorer: Box<dyn WindowScorer> = match args.scorer {
        ScorerArg::Geomean => Box::new(GeoMeanScorer::default()),
        ScorerArg::ArgmaxCenter => Box::new(ArgmaxCenterScorer),
    };

    ctx.log(&format!(
        "benchmarking {} frames x {} iters (W={}, S={}, B={})",
        probs.frames(),
        args.iters,
        cfg.window,
        cfg.stride,
        cfg.bag
    ));

    // Warm-up pass, then measured passes.
    run_online(&probs, scorer.as_ref(), &cfg, false)
        .map_err(|e| CliError::Data(anyhow::anyhow!(e)))?;
    let mut times = Vec::new();
    for _ in 0..args.iters {
        let run = run_online(&probs, scorer.as_ref(), &cfg, true)
            .map_err(|e| CliError::Data(anyhow::anyhow!(e)))?;
        times.extend(run.window_times_ms);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p50 = percentile(&times, 50.0);
    let p95 = percentile(&times, 95.0);
    let max = *times.last().unwrap();

    let summary = json!({
        "frames": probs.frames(),
        "iters": args.iters,
        "windows_measured": times.len(),
        "al_ms": algorithmic_latency(&cfg),
        "wpl_p50_ms": p50,
        "wpl_p95_ms": p95,
        "wpl_max_ms": max,
    });
    ctx.emit(
        &summary,
        &[
            format!(
                "AL {} ms over {} windows ({} iters)",
                algorithmic_latency(&cfg),
                times.len(),
                args.iters
            ),
            format!("WPL p50 {p50:.4} ms, p95 {p95:.4} ms, max {max:.4} ms"),
        ],
    );
    Ok(())
}
