//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its number. Tolerances and instance counts are pinned here and nowhere
//! else. Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctcsk_core::ctc::{
    brute_force_best_path, brute_force_total, ctc_forward_loss, forced_align, min_alignment_frames,
    path_to_spans,
};
use ctcsk_core::dict::{augment_center, equal_partition_segment};
use ctcsk_core::metrics::{boundary_iou, wer};
use ctcsk_core::objectives::{gloss_ce, instance_ce, LossOptions, ToyModel};
use ctcsk_core::online::{
    algorithmic_latency, post_step, run_online, waitk_schedule, GeoMeanScorer, IdentityTranslator,
    OnlineConfig, PostState, WaitkAction,
};
use ctcsk_core::sim::{gen_corpus_with, make_vocab, StreamSpec};
use ctcsk_core::span::SignSpan;
use ctcsk_core::ProbMatrix;

fn dirichlet_row(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12))
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Feasible random alignment instance: T <= 10, N <= 3, C <= 5.
fn random_alignment_instance(rng: &mut ChaCha8Rng) -> (ProbMatrix, Vec<usize>) {
    let classes = rng.random_range(2..=5);
    let n = rng.random_range(1..=3);
    let glosses: Vec<usize> = (0..n).map(|_| rng.random_range(1..classes)).collect();
    let min_t = min_alignment_frames(&glosses);
    let frames = rng.random_range(min_t..=10);
    let rows: Vec<Vec<f64>> = (0..frames).map(|_| dirichlet_row(rng, classes)).collect();
    (ProbMatrix::from_rows(&rows).unwrap(), glosses)
}

#[test]
fn criterion_01_forced_alignment_matches_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E001);
    for _ in 0..1000 {
        let (matrix, glosses) = random_alignment_instance(&mut rng);
        let dp = forced_align(&matrix, &glosses).expect("instance is feasible");
        let oracle = brute_force_best_path(&matrix, &glosses).expect("oracle feasible");
        assert_eq!(dp.labels, oracle.labels, "path mismatch");
        let tol = 1e-9 * oracle.score_log.abs().max(1e-300);
        assert!(
            (dp.score_log - oracle.score_log).abs() <= tol,
            "score {} vs oracle {}",
            dp.score_log,
            oracle.score_log
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    println!(
        "ACCEPTANCE 1 forced-alignment oracle equivalence (1000 instances, {:.2?}): PASS",
        elapsed
    );
}

#[test]
fn criterion_02_ctc_loss_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E002);
    for _ in 0..1000 {
        let (matrix, glosses) = random_alignment_instance(&mut rng);
        let loss = ctc_forward_loss(&matrix, &glosses).expect("feasible");
        let oracle = -brute_force_total(&matrix, &glosses).expect("feasible").ln();
        assert!(
            (loss - oracle).abs() <= 1e-6 * oracle.abs(),
            "loss {loss} vs oracle {oracle}"
        );
    }
    println!("ACCEPTANCE 2 CTC loss oracle equivalence (1000 instances): PASS");
}

/// Direct transcription of the voting post-processor, kept independent of
/// the incremental implementation it checks.
fn trace_oracle(predictions: &[usize], bag_size: usize) -> Vec<usize> {
    let mut raw: Vec<usize> = Vec::new();
    let mut temp = 0usize;
    let mut output = vec![0usize];
    for &p in predictions {
        raw.push(p);
        if raw.len() == bag_size {
            let mut voted = 0usize;
            for &candidate in &raw {
                if 2 * raw.iter().filter(|&&x| x == candidate).count() > bag_size {
                    voted = candidate;
                    break;
                }
            }
            if voted != 0 && (voted != *output.last().unwrap() || temp == 0) {
                output.push(voted);
            }
            temp = voted;
            raw.remove(0);
        }
    }
    output[1..].to_vec()
}

#[test]
fn criterion_03_post_processing_matches_trace_oracle() {
    let bags = [1usize, 3, 5, 7, 9, 11, 13];
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E003);
    for i in 0..10_000 {
        let bag_size = bags[i % bags.len()];
        let len = rng.random_range(0..=60);
        let classes = rng.random_range(2..=5);
        let predictions: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes)).collect();

        let mut state = PostState::new(bag_size);
        let mut emitted = Vec::new();
        for &p in &predictions {
            if let Some(g) = post_step(&mut state, p) {
                emitted.push(g);
            }
        }
        let oracle = trace_oracle(&predictions, bag_size);
        assert_eq!(emitted, oracle, "bag {bag_size}, stream {predictions:?}");
        assert_eq!(state.output(), oracle.as_slice());
    }
    println!("ACCEPTANCE 3 post-processing trace fidelity (10000 streams, B in 1..13): PASS");
}

#[test]
fn criterion_04_clean_corpus_decodes_exactly() {
    let started = Instant::now();
    let spec = StreamSpec {
        vocab_size: 5,
        num_signs: 5,
        duration: (8, 24),
        gap: (2, 8),
        eps: 0.0,
        boundary_blur: 0,
        seed: 42,
    };
    let corpus = gen_corpus_with(&spec, 100, (5, 10));
    let cfg = OnlineConfig::default();
    assert_eq!((cfg.window, cfg.stride, cfg.bag), (16, 1, 7));
    let scorer = GeoMeanScorer::default();
    let mut edits = 0usize;
    let mut ref_len = 0usize;
    for video in &corpus {
        let run = run_online(&video.probs, &scorer, &cfg, false).unwrap();
        let result = wer(&video.truth.glosses, &run.sequence()).unwrap();
        edits += result.edits();
        ref_len += result.ref_len;
    }
    let corpus_wer = edits as f64 / ref_len as f64;
    assert_eq!(corpus_wer, 0.0, "corpus WER must be exactly zero");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    println!(
        "ACCEPTANCE 4 online recognition on clean corpus (100 videos, WER {:.3}, {:.2?}): PASS",
        corpus_wer, elapsed
    );
}

#[test]
fn criterion_05_reported_numbers_reproduce() {
    // Algorithmic latency at a 20 ms frame period.
    for (window, expected_ms) in [(16usize, 320.0), (24, 480.0), (32, 640.0), (40, 800.0)] {
        let cfg = OnlineConfig {
            window,
            ..OnlineConfig::default()
        };
        assert_eq!(algorithmic_latency(&cfg), expected_ms);
    }

    // Word error rates of the published example predictions.
    let reference = ["TAG", "SUED", "MITTE", "WOLKE", "KRAEFTIG", "NEBEL"];
    let wide = ["TAG", "SUED", "MITTE", "MEISTENS", "NEBEL"];
    let narrow = [
        "TAG",
        "SUED",
        "NEBEL",
        "MITTE",
        "NEBEL",
        "PUEBERWIEGEND",
        "NEBEL",
    ];
    let cases: [(&[&str], f64); 3] = [(&wide, 33.3), (&narrow, 50.0), (&reference, 0.0)];
    for (hypothesis, expected_pct) in cases {
        let result = wer(&reference, hypothesis).unwrap();
        let got_pct = result.wer() * 100.0;
        assert!(
            (got_pct - expected_pct).abs() <= 0.1,
            "WER {got_pct:.1} vs expected {expected_pct:.1}"
        );
    }
    println!("ACCEPTANCE 5 latency and WER reference values: PASS");
}

#[test]
fn criterion_06_gradients_match_finite_differences() {
    let opts = LossOptions::default();
    let classes = 4;
    let h = 1e-5;
    for batch_idx in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E006 + batch_idx);
        let mut model = ToyModel::init(classes, 5, classes, 8, batch_idx);
        let rows = (0..3)
            .map(|i| {
                let gloss = 1 + (i % (classes - 1));
                let instances = (0..2)
                    .map(|_| {
                        let t_s = 16;
                        let frames = (0..t_s * classes)
                            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                            .collect();
                        let p_b = rng.random_range(0..4);
                        let p_e = t_s - 1 - rng.random_range(0..4);
                        ctcsk_core::objectives::ToyInstance {
                            frames,
                            t_s,
                            label: gloss,
                            window: (0, t_s - 1),
                            parent: (p_b, p_e),
                        }
                    })
                    .collect();
                ctcsk_core::objectives::ToyRow { gloss, instances }
            })
            .collect();
        let batch = ctcsk_core::objectives::ToyBatch { rows };
        let (_, grads) = model.batch_loss_and_grads(&batch, &opts).unwrap();
        #[allow(clippy::needless_range_loop)]
        for idx in 0..model.param_count() {
            let orig = model.param(idx);
            model.set_param(idx, orig + h);
            let plus = model.batch_loss(&batch, &opts).unwrap();
            model.set_param(idx, orig - h);
            let minus = model.batch_loss(&batch, &opts).unwrap();
            model.set_param(idx, orig);
            let fd = (plus - minus) / (2.0 * h);
            let denom = grads[idx].abs().max(fd.abs()).max(1e-8);
            assert!(
                (grads[idx] - fd).abs() / denom <= 1e-4,
                "batch {batch_idx} param {idx}: analytic {} vs fd {fd}",
                grads[idx]
            );
        }
    }
    println!("ACCEPTANCE 6 gradient verification (20 batches, rel tol 1e-4): PASS");
}

#[test]
fn criterion_07_gloss_loss_never_exceeds_instance_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E007);
    for _ in 0..10_000 {
        let m = rng.random_range(1..=5);
        let k = rng.random_range(1..=6);
        let constant_rows = rng.random::<f64>() < 0.1;
        let grid: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                if constant_rows {
                    let p = rng.random::<f64>().max(1e-9);
                    vec![p; k]
                } else {
                    (0..k).map(|_| rng.random::<f64>().max(1e-9)).collect()
                }
            })
            .collect();
        let inst = instance_ce(&grid).unwrap();
        let gloss = gloss_ce(&grid).unwrap();
        assert!(gloss <= inst + 1e-12, "gloss {gloss} > instance {inst}");
        let any_varying = grid
            .iter()
            .any(|row| row.iter().any(|&p| (p - row[0]).abs() > 1e-12));
        if any_varying {
            assert!(gloss < inst, "strictness violated: {gloss} vs {inst}");
        }
    }
    println!("ACCEPTANCE 7 gloss-level <= instance-level loss (10000 batches): PASS");
}

#[test]
fn criterion_08_augmentation_count_is_parent_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E008);
    for _ in 0..1000 {
        let video_frames = rng.random_range(4..=200);
        let t_b = rng.random_range(0..video_frames);
        let t_e = rng.random_range(t_b..video_frames);
        let parent = SignSpan::new("v", t_b, t_e, 1).unwrap();
        let window = 2 * rng.random_range(1..=16);
        let augmented = augment_center(&parent, window, video_frames);
        assert_eq!(augmented.len(), t_e - t_b + 1);
    }
    println!("ACCEPTANCE 8 centered augmentation count (1000 parents): PASS");
}

#[test]
fn criterion_09_forced_alignment_beats_equal_partition() {
    let spec = StreamSpec {
        vocab_size: 5,
        num_signs: 5,
        duration: (8, 24),
        gap: (2, 8),
        eps: 0.2,
        boundary_blur: 0,
        seed: 0x5E69,
    };
    let corpus = gen_corpus_with(&spec, 200, (5, 10));
    let mut align_sum = 0.0;
    let mut equal_sum = 0.0;
    for video in &corpus {
        let path = forced_align(&video.probs, &video.truth.glosses).expect("feasible at eps 0.2");
        let aligned = path_to_spans(&path, &video.video_id);
        align_sum += boundary_iou(&aligned, &video.truth.spans);
        let partitioned =
            equal_partition_segment(&video.video_id, video.probs.frames(), &video.truth.glosses)
                .unwrap();
        equal_sum += boundary_iou(&partitioned, &video.truth.spans);
    }
    let align_mean = align_sum / corpus.len() as f64;
    let equal_mean = equal_sum / corpus.len() as f64;
    assert!(
        align_mean - equal_mean >= 0.2,
        "forced-align IoU {align_mean:.3} vs equal-partition {equal_mean:.3}"
    );
    println!(
        "ACCEPTANCE 9 segmentor comparison (IoU {:.3} vs {:.3}, margin {:.3}): PASS",
        align_mean,
        equal_mean,
        align_mean - equal_mean
    );
}

#[test]
fn criterion_10_waitk_schedule_invariant() {
    let vocab = make_vocab(6);
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11C_E010);
    for k in [1usize, 2, 4] {
        for _ in 0..1000 {
            let len = rng.random_range(0..=30);
            let source: Vec<usize> = (0..len).map(|_| rng.random_range(1..=6)).collect();
            let mut translator = IdentityTranslator::new(&vocab);
            let run = waitk_schedule(k, &source, &mut translator);
            assert_eq!(run.tokens.len(), source.len());
            let mut reads = 0usize;
            let mut emitted = 0usize;
            for action in &run.actions {
                match action {
                    WaitkAction::Read { .. } => reads += 1,
                    WaitkAction::Emit { .. } => {
                        emitted += 1;
                        assert!(
                            reads >= (emitted + k - 1).min(source.len()),
                            "token {emitted} after only {reads} reads (k={k})"
                        );
                    }
                }
            }
            if k >= source.len() && !source.is_empty() {
                // Degenerate wait-all: every read precedes every emission.
                let first_emit = run
                    .actions
                    .iter()
                    .position(|a| matches!(a, WaitkAction::Emit { .. }))
                    .unwrap();
                assert!(run.actions[..first_emit]
                    .iter()
                    .all(|a| matches!(a, WaitkAction::Read { .. })));
                assert_eq!(first_emit, source.len());
            }
        }
    }
    println!("ACCEPTANCE 10 wait-k schedule invariant (k in 1,2,4 x 1000): PASS");
}
