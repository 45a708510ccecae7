//! Sign-dictionary construction: corpus segmentation into pseudo ground
//! truths, window augmentation around each isolated sign, background-region
//! harvesting, and the gloss-level mini-batch sampler.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ctc;
use crate::prob::ProbMatrix;
use crate::span::{Dictionary, SignSpan, SpanKind};
use crate::vocab::{GlossVocab, BLANK};

#[derive(Debug, Error, PartialEq)]
pub enum DictError {
    #[error("corpus contains no videos")]
    EmptyCorpus,
    #[error("video of {frames} frames is too short for {glosses} glosses")]
    TooShort { frames: usize, glosses: usize },
    #[error("batch wants {wanted} glosses but the dictionary has {available}")]
    TooFewGlosses { wanted: usize, available: usize },
    #[error("span error: {0}")]
    Span(#[from] crate::span::SpanError),
}

/// How a corpus is cut into isolated signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segmentor {
    /// Optimal-path forced alignment of each video against its reference.
    ForcedAlign,
    /// Ablation baseline: equal contiguous partitions, one per gloss.
    EqualPartition,
}

/// One corpus video: its probability stream and reference gloss sequence.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub video_id: String,
    pub probs: ProbMatrix,
    pub glosses: Vec<usize>,
}

/// A video the segmentor had to skip, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedVideo {
    pub video_id: String,
    pub reason: String,
}

/// Result of segmenting a corpus: the pseudo-GT dictionary, the blank
/// regions of each alignment path (for background harvesting), and the
/// videos that failed to align.
#[derive(Debug)]
pub struct SegmentOutcome {
    pub dictionary: Dictionary,
    pub blank_runs: Vec<SignSpan>,
    pub skipped: Vec<SkippedVideo>,
}

/// Cuts `frames` into one contiguous span per gloss. The first
/// `frames % n` spans are one frame longer, so the spans tile `[0, T-1]`
/// with lengths `ceil(T/n)` then `floor(T/n)`.
pub fn equal_partition_segment(
    video_id: &str,
    frames: usize,
    glosses: &[usize],
) -> Result<Vec<SignSpan>, DictError> {
    let n = glosses.len();
    if n == 0 || frames < n {
        return Err(DictError::TooShort { frames, glosses: n });
    }
    let base = frames / n;
    let extra = frames % n;
    let mut spans = Vec::with_capacity(n);
    let mut start = 0;
    for (i, &gloss) in glosses.iter().enumerate() {
        let len = base + usize::from(i < extra);
        spans.push(SignSpan {
            video_id: video_id.to_string(),
            t_b: start,
            t_e: start + len - 1,
            gloss,
        });
        start += len;
    }
    Ok(spans)
}

/// Segments every corpus video into pseudo ground truths, keyed by gloss.
/// Videos that fail to align are skipped and reported in the outcome.
pub fn segment_corpus(
    vocab: GlossVocab,
    items: &[CorpusItem],
    segmentor: Segmentor,
) -> Result<SegmentOutcome, DictError> {
    if items.is_empty() {
        return Err(DictError::EmptyCorpus);
    }
    let mut dictionary = Dictionary::new(vocab);
    let mut blank_runs = Vec::new();
    let mut skipped = Vec::new();
    for item in items {
        let spans = match segmentor {
            Segmentor::ForcedAlign => match ctc::forced_align(&item.probs, &item.glosses) {
                Ok(path) => {
                    blank_runs.extend(ctc::path_blank_runs(&path, &item.video_id));
                    ctc::path_to_spans(&path, &item.video_id)
                }
                Err(err) => {
                    skipped.push(SkippedVideo {
                        video_id: item.video_id.clone(),
                        reason: err.to_string(),
                    });
                    continue;
                }
            },
            Segmentor::EqualPartition => {
                match equal_partition_segment(&item.video_id, item.probs.frames(), &item.glosses) {
                    Ok(spans) => spans,
                    Err(err) => {
                        skipped.push(SkippedVideo {
                            video_id: item.video_id.clone(),
                            reason: err.to_string(),
                        });
                        continue;
                    }
                }
            }
        };
        for span in spans {
            dictionary.insert(span, SpanKind::PseudoGt, None)?;
        }
    }
    Ok(SegmentOutcome {
        dictionary,
        blank_runs,
        skipped,
    })
}

/// A window cropped around a pseudo-GT sign.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSpan {
    /// The pseudo ground truth the window was generated from.
    pub parent: SignSpan,
    /// The cropped window, clamped to the video bounds.
    pub window: SignSpan,
    /// Anchor frame inside the parent the window is associated with.
    pub center: usize,
}

/// Generates one window per parent frame: the window anchored at frame `i`
/// spans `[i - w/2, i + w/2 - 1]` before clamping to `[0, video_frames - 1]`.
/// Exactly `t_e - t_b + 1` windows come back.
///
/// # Panics
/// Panics if `w` is odd or smaller than 2, or if the parent exceeds the
/// video bounds.
pub fn augment_center(parent: &SignSpan, w: usize, video_frames: usize) -> Vec<AugmentedSpan> {
    assert!(
        w >= 2 && w.is_multiple_of(2),
        "window size must be even and >= 2"
    );
    assert!(parent.t_e < video_frames, "parent exceeds video bounds");
    let half = (w / 2) as i64;
    let mut out = Vec::with_capacity(parent.len());
    for center in parent.t_b..=parent.t_e {
        let raw_lo = center as i64 - half;
        let raw_hi = center as i64 + half - 1;
        let lo = raw_lo.max(0) as usize;
        let hi = (raw_hi.min(video_frames as i64 - 1)) as usize;
        out.push(AugmentedSpan {
            parent: parent.clone(),
            window: SignSpan {
                video_id: parent.video_id.clone(),
                t_b: lo,
                t_e: hi,
                gloss: parent.gloss,
            },
            center,
        });
    }
    out
}

/// Selects every length-`w` window whose interval IoU with the parent is at
/// least `gamma`, enumerating all integer start offsets that overlap the
/// parent. IoU is computed on the unclamped window; the stored window is
/// clamped to the video bounds like [`augment_center`].
///
/// # Panics
/// Panics unless `0 < gamma <= 1` and `w >= 1`.
pub fn augment_iou(
    parent: &SignSpan,
    w: usize,
    video_frames: usize,
    gamma: f64,
) -> Vec<AugmentedSpan> {
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    assert!(w >= 1, "window size must be at least 1");
    assert!(parent.t_e < video_frames, "parent exceeds video bounds");
    let parent_len = parent.len() as i64;
    let w_len = w as i64;
    let mut out = Vec::new();
    let first = parent.t_b as i64 - w_len + 1;
    let last = parent.t_e as i64;
    for start in first..=last {
        let end = start + w_len - 1;
        let inter_lo = start.max(parent.t_b as i64);
        let inter_hi = end.min(parent.t_e as i64);
        let inter = (inter_hi - inter_lo + 1).max(0);
        let iou = inter as f64 / (parent_len + w_len - inter) as f64;
        if iou >= gamma {
            let lo = start.max(0) as usize;
            let hi = end.min(video_frames as i64 - 1) as usize;
            let fg_center = (inter_lo + (inter_hi - inter_lo) / 2) as usize;
            out.push(AugmentedSpan {
                parent: parent.clone(),
                window: SignSpan {
                    video_id: parent.video_id.clone(),
                    t_b: lo,
                    t_e: hi,
                    gloss: parent.gloss,
                },
                center: fg_center,
            });
        }
    }
    out
}

/// Augmentation strategy for dictionary construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentStrategy {
    /// Per-frame centered windows, no threshold.
    Center,
    /// IoU-thresholded windows.
    Iou { gamma: f64 },
    /// Pseudo ground truths only.
    None,
}

/// Configuration for full dictionary construction.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub window: usize,
    pub augment: AugmentStrategy,
    /// Percentage of blank-region runs harvested as background instances.
    pub bg_percent: f64,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            window: 16,
            augment: AugmentStrategy::Center,
            bg_percent: 100.0,
            seed: 0,
        }
    }
}

/// Outcome of [`build_dictionary`] with construction counters.
#[derive(Debug)]
pub struct BuildOutcome {
    pub dictionary: Dictionary,
    pub skipped: Vec<SkippedVideo>,
    pub pseudo_gt: usize,
    pub augmented: usize,
    pub background: usize,
}

/// Builds the full training dictionary: segments the corpus, augments each
/// pseudo ground truth with windows, and harvests the configured percentage
/// of blank regions as background instances (each treated exactly like a
/// pseudo-GT sign, window augmentation included).
pub fn build_dictionary(
    vocab: GlossVocab,
    items: &[CorpusItem],
    segmentor: Segmentor,
    cfg: &BuildConfig,
) -> Result<BuildOutcome, DictError> {
    let outcome = segment_corpus(vocab, items, segmentor)?;
    let mut dictionary = outcome.dictionary;
    let frames_of = |video_id: &str| {
        items
            .iter()
            .find(|i| i.video_id == video_id)
            .map(|i| i.probs.frames())
            .expect("span references a corpus video")
    };

    let parents: Vec<SignSpan> = dictionary.iter_all().map(|e| e.span.clone()).collect();
    let mut pseudo_gt = parents.len();
    let mut augmented = 0;
    for parent in &parents {
        let video_frames = frames_of(&parent.video_id);
        for aug in augment_spans(parent, video_frames, cfg) {
            dictionary.insert(aug.window, SpanKind::Augmented, Some(aug.parent))?;
            augmented += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_runs = outcome.blank_runs.len();
    let take = (((n_runs as f64) * cfg.bg_percent / 100.0).round() as usize).min(n_runs);
    let mut chosen = index_sample(&mut rng, n_runs, take).into_vec();
    chosen.sort_unstable();
    let mut background = 0;
    for idx in chosen {
        let run = &outcome.blank_runs[idx];
        let video_frames = frames_of(&run.video_id);
        dictionary.insert_background(run.clone(), SpanKind::PseudoGt, None)?;
        pseudo_gt += 1;
        background += 1;
        for aug in augment_spans(run, video_frames, cfg) {
            dictionary.insert_background(aug.window, SpanKind::Augmented, Some(aug.parent))?;
            augmented += 1;
            background += 1;
        }
    }

    Ok(BuildOutcome {
        dictionary,
        skipped: outcome.skipped,
        pseudo_gt,
        augmented,
        background,
    })
}

fn augment_spans(parent: &SignSpan, video_frames: usize, cfg: &BuildConfig) -> Vec<AugmentedSpan> {
    match cfg.augment {
        AugmentStrategy::Center => augment_center(parent, cfg.window, video_frames),
        AugmentStrategy::Iou { gamma } => augment_iou(parent, cfg.window, video_frames, gamma),
        AugmentStrategy::None => Vec::new(),
    }
}

/// A gloss-level mini-batch: `m` label-homogeneous rows of `k` instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub rows: Vec<BatchRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub gloss: usize,
    pub instances: Vec<crate::span::DictEntry>,
}

impl Batch {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows.first().map(|r| r.instances.len()).unwrap_or(0)
    }
}

/// Samples `m` distinct glosses, then `k` instances per gloss (without
/// replacement when a gloss has at least `k` instances, with replacement
/// otherwise). The background section counts as one more sampleable class
/// when non-empty. Deterministic for a fixed seed.
pub fn sample_batch(
    dictionary: &Dictionary,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<Batch, DictError> {
    assert!(m >= 1 && k >= 1, "batch shape must be at least 1x1");
    let mut classes: Vec<usize> = dictionary.glosses().collect();
    if !dictionary.background().is_empty() {
        classes.insert(0, BLANK);
    }
    if classes.len() < m {
        return Err(DictError::TooFewGlosses {
            wanted: m,
            available: classes.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index_sample(&mut rng, classes.len(), m).into_vec();
    picked.sort_unstable();
    let mut rows = Vec::with_capacity(m);
    for class_idx in picked {
        let gloss = classes[class_idx];
        let pool = if gloss == BLANK {
            dictionary.background()
        } else {
            dictionary.instances(gloss)
        };
        let instances = if pool.len() >= k {
            let mut idxs = index_sample(&mut rng, pool.len(), k).into_vec();
            idxs.sort_unstable();
            idxs.into_iter().map(|i| pool[i].clone()).collect()
        } else {
            (0..k)
                .map(|_| pool[rng.random_range(0..pool.len())].clone())
                .collect()
        };
        rows.push(BatchRow { gloss, instances });
    }
    Ok(Batch { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::interval_iou;

    fn vocab(n: usize) -> GlossVocab {
        GlossVocab::new((0..n).map(|i| format!("G{i:02}")).collect()).unwrap()
    }

    #[test]
    fn equal_partition_even_split() {
        let spans = equal_partition_segment("v", 6, &[1, 2]).unwrap();
        assert_eq!(
            spans.iter().map(|s| (s.t_b, s.t_e)).collect::<Vec<_>>(),
            vec![(0, 2), (3, 5)]
        );
    }

    #[test]
    fn equal_partition_remainder_to_front() {
        let spans = equal_partition_segment("v", 7, &[1, 2]).unwrap();
        assert_eq!(
            spans.iter().map(|s| (s.t_b, s.t_e)).collect::<Vec<_>>(),
            vec![(0, 3), (4, 6)]
        );
    }

    #[test]
    fn equal_partition_too_short() {
        assert_eq!(
            equal_partition_segment("v", 1, &[1, 2]).unwrap_err(),
            DictError::TooShort {
                frames: 1,
                glosses: 2
            }
        );
    }

    #[test]
    fn segment_corpus_forced_align_example() {
        let probs =
            ProbMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9], vec![0.2, 0.8]]).unwrap();
        let items = vec![CorpusItem {
            video_id: "v0".into(),
            probs,
            glosses: vec![1],
        }];
        let outcome = segment_corpus(vocab(1), &items, Segmentor::ForcedAlign).unwrap();
        assert!(outcome.skipped.is_empty());
        let spans = outcome.dictionary.instances(1);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].span.t_b, spans[0].span.t_e), (1, 2));
        // The leading blank frame is harvested as a background run.
        assert_eq!(outcome.blank_runs.len(), 1);
        assert_eq!(
            (outcome.blank_runs[0].t_b, outcome.blank_runs[0].t_e),
            (0, 0)
        );
    }

    #[test]
    fn segment_corpus_skips_failures() {
        let good =
            ProbMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9], vec![0.2, 0.8]]).unwrap();
        let short = ProbMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let items = vec![
            CorpusItem {
                video_id: "ok".into(),
                probs: good,
                glosses: vec![1],
            },
            CorpusItem {
                video_id: "bad".into(),
                probs: short,
                glosses: vec![1, 1],
            },
        ];
        let outcome = segment_corpus(vocab(1), &items, Segmentor::ForcedAlign).unwrap();
        assert_eq!(outcome.skipped.len(), 1);
        assert_eq!(outcome.skipped[0].video_id, "bad");
        assert_eq!(outcome.dictionary.total_instances(), 1);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(
            segment_corpus(vocab(1), &[], Segmentor::ForcedAlign).unwrap_err(),
            DictError::EmptyCorpus
        );
    }

    #[test]
    fn center_augmentation_matches_window_formula() {
        let parent = SignSpan::new("v", 10, 14, 1).unwrap();
        let augs = augment_center(&parent, 16, 100);
        assert_eq!(augs.len(), 5);
        let bounds: Vec<(usize, usize)> =
            augs.iter().map(|a| (a.window.t_b, a.window.t_e)).collect();
        assert_eq!(bounds, vec![(2, 17), (3, 18), (4, 19), (5, 20), (6, 21)]);
    }

    #[test]
    fn center_augmentation_clamps_at_edges() {
        let parent = SignSpan::new("v", 0, 0, 1).unwrap();
        let augs = augment_center(&parent, 16, 8);
        assert_eq!(augs.len(), 1);
        assert_eq!((augs[0].window.t_b, augs[0].window.t_e), (0, 7));
    }

    #[test]
    fn center_augmentation_minimal_window() {
        let parent = SignSpan::new("v", 5, 5, 1).unwrap();
        let augs = augment_center(&parent, 2, 100);
        assert_eq!(augs.len(), 1);
        assert_eq!((augs[0].window.t_b, augs[0].window.t_e), (4, 5));
    }

    #[test]
    fn iou_augmentation_thresholds() {
        // A length-5 parent inside a length-16 window caps IoU at 5/16, so
        // a 0.5 threshold yields nothing.
        let parent = SignSpan::new("v", 10, 14, 1).unwrap();
        assert!(augment_iou(&parent, 16, 100, 0.5).is_empty());

        // A vanishing threshold accepts every overlapping start offset.
        let all = augment_iou(&parent, 16, 100, 1e-9);
        assert_eq!(all.len(), 5 + 16 - 1);
        assert!(all
            .iter()
            .all(|a| interval_iou((a.window.t_b, a.window.t_e), (10, 14)) > 0.0));

        // Window length equal to the parent with gamma 1 selects exactly the
        // parent itself.
        let exact = augment_iou(&parent, 5, 100, 1.0);
        assert_eq!(exact.len(), 1);
        assert_eq!((exact[0].window.t_b, exact[0].window.t_e), (10, 14));
    }

    fn toy_dictionary(glosses: usize, per_gloss: usize) -> Dictionary {
        let mut d = Dictionary::new(vocab(glosses));
        for g in 1..=glosses {
            for i in 0..per_gloss {
                d.insert(
                    SignSpan::new("v", i * 10, i * 10 + 4, g).unwrap(),
                    SpanKind::PseudoGt,
                    None,
                )
                .unwrap();
            }
        }
        d
    }

    #[test]
    fn batch_shape_and_determinism() {
        let d = toy_dictionary(6, 8);
        let b1 = sample_batch(&d, 4, 6, 7).unwrap();
        let b2 = sample_batch(&d, 4, 6, 7).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(b1.m(), 4);
        assert_eq!(b1.k(), 6);
        for row in &b1.rows {
            assert!(row.instances.iter().all(|e| e.span.gloss == row.gloss));
        }
        let glosses: std::collections::HashSet<_> = b1.rows.iter().map(|r| r.gloss).collect();
        assert_eq!(glosses.len(), 4);
    }

    #[test]
    fn batch_single_instance() {
        let d = toy_dictionary(1, 1);
        let b = sample_batch(&d, 1, 1, 0).unwrap();
        assert_eq!(b.m(), 1);
        assert_eq!(b.k(), 1);
    }

    #[test]
    fn batch_rejects_too_few_glosses() {
        let d = toy_dictionary(3, 2);
        assert_eq!(
            sample_batch(&d, 4, 2, 0).unwrap_err(),
            DictError::TooFewGlosses {
                wanted: 4,
                available: 3
            }
        );
    }

    #[test]
    fn batch_resamples_scarce_glosses() {
        let d = toy_dictionary(2, 1);
        let b = sample_batch(&d, 2, 5, 3).unwrap();
        assert_eq!(b.k(), 5);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // One window per parent frame, and before clamping each window
            // overlaps its parent by at least min(w/2, parent length).
            #[test]
            fn center_windows_count_and_overlap(
                t_b in 0usize..100,
                len in 1usize..40,
                half in 1usize..16,
            ) {
                let w = 2 * half;
                let t_e = t_b + len - 1;
                let video_frames = t_e + 50;
                let parent = SignSpan::new("v", t_b, t_e, 1).unwrap();
                let augs = augment_center(&parent, w, video_frames);
                prop_assert_eq!(augs.len(), len);
                for aug in &augs {
                    let raw_lo = aug.center as i64 - half as i64;
                    let raw_hi = aug.center as i64 + half as i64 - 1;
                    let overlap = raw_hi.min(t_e as i64) - raw_lo.max(t_b as i64) + 1;
                    prop_assert!(overlap >= (half.min(len)) as i64);
                    prop_assert!(aug.window.len() <= w);
                    prop_assert!((t_b..=t_e).contains(&aug.center));
                }
            }

            // Equal partitions tile the stream with no gaps or overlaps.
            #[test]
            fn equal_partition_tiles(frames in 1usize..200, n in 1usize..12) {
                prop_assume!(frames >= n);
                let glosses: Vec<usize> = (0..n).map(|i| i % 3 + 1).collect();
                let spans = equal_partition_segment("v", frames, &glosses).unwrap();
                prop_assert_eq!(spans.len(), n);
                prop_assert_eq!(spans[0].t_b, 0);
                prop_assert_eq!(spans[n - 1].t_e, frames - 1);
                for pair in spans.windows(2) {
                    prop_assert_eq!(pair[1].t_b, pair[0].t_e + 1);
                }
                let lens: Vec<usize> = spans.iter().map(|s| s.len()).collect();
                for pair in lens.windows(2) {
                    prop_assert!(pair[0] >= pair[1]);
                    prop_assert!(pair[0] - pair[1] <= 1);
                }
            }
        }
    }
}
