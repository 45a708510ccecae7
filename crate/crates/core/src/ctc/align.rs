//! Optimal-path forced alignment and span extraction.

use super::{collapse_labels, min_alignment_frames, CtcError, ExtendedGlossSeq};
use crate::prob::ProbMatrix;
use crate::span::SignSpan;
use crate::vocab::BLANK;

/// A frame-level alignment path together with its log probability.
///
/// Collapsing the labels (merge adjacent duplicates, drop blanks) always
/// reproduces the reference gloss sequence the path was aligned against.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub labels: Vec<usize>,
    pub score_log: f64,
}

/// Repeats every row of `matrix` `factor` times, so row `k` of the output
/// equals row `k / factor` of the input. Matches the frame-duplication
/// semantics of temporal upsampling and trivially preserves
/// row-stochasticity.
pub fn upsample_probs(matrix: &ProbMatrix, factor: usize) -> ProbMatrix {
    assert!(factor >= 1, "upsample factor must be at least 1");
    if factor == 1 {
        return matrix.clone();
    }
    let classes = matrix.classes();
    let mut data = Vec::with_capacity(matrix.frames() * factor * classes);
    for row in matrix.rows() {
        for _ in 0..factor {
            data.extend_from_slice(row);
        }
    }
    ProbMatrix::from_flat_unchecked(matrix.frames() * factor, classes, data)
}

/// Searches the maximum-probability alignment path of `matrix` against the
/// reference `glosses`.
///
/// The search runs over the extended gloss sequence: `q(t, s)` is the best
/// log probability of any legal prefix that sits in state `s` at frame `t`,
/// and the path is recovered by walking the table backwards. Argmax ties
/// prefer the larger state index, which biases the walk toward having
/// progressed further through the reference.
///
/// Returns `NoFeasiblePath` when the stream is too short for the reference
/// (immediate gloss repeats need a separating blank frame) or when every
/// feasible path has probability zero.
pub fn forced_align(matrix: &ProbMatrix, glosses: &[usize]) -> Result<AlignmentPath, CtcError> {
    let ext = ExtendedGlossSeq::new(glosses, matrix.classes())?;
    let frames = matrix.frames();
    let min_frames = min_alignment_frames(glosses);
    if frames < min_frames {
        return Err(CtcError::NoFeasiblePath { frames, min_frames });
    }

    let n_states = ext.len();
    let lp = |t: usize, s: usize| matrix.get(t, ext.class(s)).ln();

    let mut q = vec![f64::NEG_INFINITY; frames * n_states];
    q[0] = lp(0, 0);
    q[1] = lp(0, 1);
    for t in 1..frames {
        for s in 0..n_states {
            let lo = ext.earliest_predecessor(s);
            let mut best = f64::NEG_INFINITY;
            for k in lo..=s {
                let v = q[(t - 1) * n_states + k];
                if v > best {
                    best = v;
                }
            }
            q[t * n_states + s] = lp(t, s) + best;
        }
    }

    // Ties prefer the larger state index throughout the backtrack.
    let [fin_a, fin_b] = ext.final_states();
    let mut state = if q[(frames - 1) * n_states + fin_b] >= q[(frames - 1) * n_states + fin_a] {
        fin_b
    } else {
        fin_a
    };
    let score_log = q[(frames - 1) * n_states + state];
    if score_log == f64::NEG_INFINITY {
        // Structurally feasible but probability zero everywhere: treat an
        // alignment the model gives no mass to as a failure.
        return Err(CtcError::NoFeasiblePath { frames, min_frames });
    }

    let mut states = vec![0usize; frames];
    states[frames - 1] = state;
    for t in (0..frames - 1).rev() {
        let lo = ext.earliest_predecessor(state);
        let mut best_k = lo;
        let mut best = f64::NEG_INFINITY;
        for k in lo..=state {
            let v = q[t * n_states + k];
            if v >= best {
                best = v;
                best_k = k;
            }
        }
        state = best_k;
        states[t] = state;
    }

    let labels: Vec<usize> = states.iter().map(|&s| ext.class(s)).collect();
    debug_assert_eq!(collapse_labels(&labels), glosses);
    Ok(AlignmentPath { labels, score_log })
}

/// Aggregates successive duplicate predictions of an alignment path into
/// isolated sign spans. Blank runs produce no span.
pub fn path_to_spans(path: &AlignmentPath, video_id: &str) -> Vec<SignSpan> {
    spans_of_labels(&path.labels, video_id, false)
}

/// The blank runs of an alignment path, as spans carrying the blank class.
/// These are the co-articulation regions between aligned signs.
pub fn path_blank_runs(path: &AlignmentPath, video_id: &str) -> Vec<SignSpan> {
    spans_of_labels(&path.labels, video_id, true)
        .into_iter()
        .filter(|s| s.gloss == BLANK)
        .collect()
}

/// Maximal runs of `labels`, as spans. With `include_blanks` the blank runs
/// are returned too (used to harvest background training regions).
pub(crate) fn spans_of_labels(
    labels: &[usize],
    video_id: &str,
    include_blanks: bool,
) -> Vec<SignSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            let class = labels[start];
            if class != BLANK || include_blanks {
                spans.push(SignSpan {
                    video_id: video_id.to_string(),
                    t_b: start,
                    t_e: t - 1,
                    gloss: class,
                });
            }
            start = t;
        }
    }
    spans
}
