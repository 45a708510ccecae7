//! Synthetic probability-stream generator with known ground truth.
//!
//! A stream is laid out as alternating blank gaps and sign spans:
//! `gap, sign, gap, sign, ..., gap`, tiling `[0, T-1]` exactly. Within a
//! sign span the row puts mass `1 - eps` on the sign's class and spreads
//! `eps` uniformly over the other classes; within a gap the dominant class
//! is blank. Everything is a pure function of the parameters and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prob::ProbMatrix;
use crate::span::SignSpan;
use crate::vocab::{GlossVocab, BLANK};

/// Parameters of a synthetic stream.
#[derive(Debug, Clone)]
pub struct StreamSpec {
    /// Number of gloss labels, excluding the blank class.
    pub vocab_size: usize,
    /// Number of signs in the stream.
    pub num_signs: usize,
    /// Inclusive range of sign durations in frames.
    pub duration: (usize, usize),
    /// Inclusive range of co-articulation gap lengths in frames.
    pub gap: (usize, usize),
    /// Confusion level in `[0, 1)`: mass taken from the true class and
    /// spread uniformly over the other classes.
    pub eps: f64,
    /// Frames on each side of a segment boundary that mix the two adjacent
    /// classes. Zero keeps the pure confusion model.
    pub boundary_blur: usize,
    pub seed: u64,
}

impl Default for StreamSpec {
    fn default() -> Self {
        Self {
            vocab_size: 5,
            num_signs: 5,
            duration: (8, 24),
            gap: (2, 8),
            eps: 0.0,
            boundary_blur: 0,
            seed: 0,
        }
    }
}

impl StreamSpec {
    fn validate(&self) {
        assert!(self.vocab_size >= 1, "vocabulary must be non-empty");
        assert!(self.num_signs >= 1, "stream needs at least one sign");
        assert!(self.duration.0 >= 1, "sign durations must be at least 1");
        assert!(self.duration.0 <= self.duration.1, "bad duration range");
        assert!(self.gap.0 <= self.gap.1, "bad gap range");
        assert!((0.0..1.0).contains(&self.eps), "eps must be in [0, 1)");
    }
}

/// Known truth of a generated stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub glosses: Vec<usize>,
    pub spans: Vec<SignSpan>,
    pub frames: usize,
}

/// One generated corpus video.
#[derive(Debug, Clone)]
pub struct CorpusVideo {
    pub video_id: String,
    pub probs: ProbMatrix,
    pub truth: GroundTruth,
}

/// Vocabulary of auto-named glosses `G000..`, shared by generated corpora.
pub fn make_vocab(vocab_size: usize) -> GlossVocab {
    GlossVocab::new((0..vocab_size).map(|i| format!("G{i:03}")).collect())
        .expect("generated labels are unique")
}

/// Generates the ground-truth layout only: gloss sequence, spans, and total
/// frame count. Consecutive signs never repeat the same gloss when the
/// vocabulary allows it, so a clean stream is always recoverable by the
/// online decoder's deduplication.
pub fn gen_truth(spec: &StreamSpec, video_id: &str, stream: u64) -> GroundTruth {
    spec.validate();
    let mut rng = rng_for(spec.seed, stream);
    let mut glosses = Vec::with_capacity(spec.num_signs);
    let mut prev = BLANK;
    for _ in 0..spec.num_signs {
        let gloss = loop {
            let g = rng.random_range(1..=spec.vocab_size);
            if g != prev || spec.vocab_size == 1 {
                break g;
            }
        };
        glosses.push(gloss);
        prev = gloss;
    }

    let mut spans = Vec::with_capacity(spec.num_signs);
    let mut t = 0usize;
    for &gloss in &glosses {
        t += rng.random_range(spec.gap.0..=spec.gap.1);
        let dur = rng.random_range(spec.duration.0..=spec.duration.1);
        spans.push(SignSpan {
            video_id: video_id.to_string(),
            t_b: t,
            t_e: t + dur - 1,
            gloss,
        });
        t += dur;
    }
    t += rng.random_range(spec.gap.0..=spec.gap.1);

    GroundTruth {
        glosses,
        spans,
        frames: t,
    }
}

/// Generates a stream and its ground truth. Deterministic per (spec, seed).
pub fn gen_stream(spec: &StreamSpec, video_id: &str) -> (ProbMatrix, GroundTruth) {
    gen_stream_indexed(spec, video_id, 0)
}

fn gen_stream_indexed(spec: &StreamSpec, video_id: &str, stream: u64) -> (ProbMatrix, GroundTruth) {
    let truth = gen_truth(spec, video_id, stream);
    let classes = spec.vocab_size + 1;

    // Per-frame dominant class from the span layout.
    let mut frame_class = vec![BLANK; truth.frames];
    for span in &truth.spans {
        for slot in &mut frame_class[span.t_b..=span.t_e] {
            *slot = span.gloss;
        }
    }

    let mut data = Vec::with_capacity(truth.frames * classes);
    for t in 0..truth.frames {
        let own = frame_class[t];
        if spec.boundary_blur > 0 {
            if let Some((other, weight)) = blur_neighbor(&frame_class, t, spec.boundary_blur) {
                push_blurred_row(&mut data, classes, own, other, weight, spec.eps);
                continue;
            }
        }
        push_row(&mut data, classes, own, spec.eps);
    }

    let probs = ProbMatrix::from_flat(truth.frames, classes, data)
        .expect("generated rows are stochastic by construction");
    (probs, truth)
}

/// Mass `1 - eps` on `own`, `eps` spread uniformly over the other classes.
fn push_row(data: &mut Vec<f64>, classes: usize, own: usize, eps: f64) {
    let spread = if classes > 1 {
        eps / (classes - 1) as f64
    } else {
        0.0
    };
    for c in 0..classes {
        data.push(if c == own { 1.0 - eps } else { spread });
    }
}

/// Boundary frames mix the neighbouring segment's class into the dominant
/// mass; the own-class weight grows linearly with distance to the boundary.
fn blur_neighbor(frame_class: &[usize], t: usize, blur: usize) -> Option<(usize, f64)> {
    let own = frame_class[t];
    for d in 0..blur {
        if t > d && frame_class[t - d - 1] != own {
            let weight = (d + 1) as f64 / (blur + 1) as f64;
            return Some((frame_class[t - d - 1], weight));
        }
        if t + d + 1 < frame_class.len() && frame_class[t + d + 1] != own {
            let weight = (d + 1) as f64 / (blur + 1) as f64;
            return Some((frame_class[t + d + 1], weight));
        }
    }
    None
}

fn push_blurred_row(
    data: &mut Vec<f64>,
    classes: usize,
    own: usize,
    other: usize,
    own_weight: f64,
    eps: f64,
) {
    let uniform = eps / classes as f64;
    for c in 0..classes {
        let base = if c == own {
            own_weight
        } else if c == other {
            1.0 - own_weight
        } else {
            0.0
        };
        data.push((1.0 - eps) * base + uniform);
    }
}

/// Generates a batch of streams sharing one spec: video `i` is named
/// `vid_{i:04}` and drawn from an independent random stream of the seed.
pub fn gen_corpus(spec: &StreamSpec, num_videos: usize) -> Vec<CorpusVideo> {
    gen_corpus_with(spec, num_videos, (spec.num_signs, spec.num_signs))
}

/// Like [`gen_corpus`] but draws each video's sign count uniformly from the
/// inclusive `signs` range.
pub fn gen_corpus_with(
    spec: &StreamSpec,
    num_videos: usize,
    signs: (usize, usize),
) -> Vec<CorpusVideo> {
    assert!(signs.0 >= 1 && signs.0 <= signs.1, "bad signs range");
    let mut count_rng = rng_for(spec.seed, u64::MAX);
    (0..num_videos)
        .map(|i| {
            let video_spec = StreamSpec {
                num_signs: count_rng.random_range(signs.0..=signs.1),
                ..spec.clone()
            };
            let video_id = format!("vid_{i:04}");
            let (probs, truth) = gen_stream_indexed(&video_spec, &video_id, i as u64);
            CorpusVideo {
                video_id,
                probs,
                truth,
            }
        })
        .collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
