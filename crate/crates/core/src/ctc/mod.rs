//! CTC forced alignment, forward loss, brute-force oracles, and a streaming
//! prefix beam decoder.
//!
//! All dynamic programming runs in log space with `-inf` for impossible
//! states; probabilities of exactly zero map to `-inf` rather than a floor
//! so that oracle comparisons stay exact. The trellis is built over the
//! extended gloss sequence, which interleaves the blank class between the
//! reference glosses and pads it on both ends.

mod align;
mod beam;
mod loss;
mod oracle;

pub use align::{forced_align, path_blank_runs, path_to_spans, upsample_probs, AlignmentPath};
pub use beam::{beam_decode, BeamHypothesis, BeamState};
pub use loss::ctc_forward_loss;
pub use oracle::{brute_force_best_path, brute_force_total, ORACLE_MAX_FRAMES, ORACLE_MAX_GLOSSES};

use thiserror::Error;

use crate::vocab::BLANK;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("reference gloss sequence is empty")]
    EmptyReference,
    #[error("reference glosses must not contain the blank class")]
    BlankGloss,
    #[error("unknown gloss class {gloss}, matrix has {classes} classes")]
    UnknownGloss { gloss: usize, classes: usize },
    #[error(
        "no feasible alignment path: {frames} frames cannot carry {min_frames} required steps"
    )]
    NoFeasiblePath { frames: usize, min_frames: usize },
    #[error("oracle instance too large: {frames} frames x {glosses} glosses")]
    OracleTooLarge { frames: usize, glosses: usize },
}

/// Collapses a frame-level label sequence: merge adjacent duplicates, then
/// drop blanks. `(A, blank, A)` collapses to `[A, A]`.
pub fn collapse_labels(labels: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &label in labels {
        if Some(label) != prev && label != BLANK {
            out.push(label);
        }
        prev = Some(label);
    }
    out
}

/// Minimum number of frames an alignment against `glosses` needs: one frame
/// per gloss plus a separating blank frame between immediate repeats.
pub fn min_alignment_frames(glosses: &[usize]) -> usize {
    let repeats = glosses.windows(2).filter(|w| w[0] == w[1]).count();
    glosses.len() + repeats
}

/// The reference gloss sequence with blanks interleaved: for glosses
/// `(g_1..g_N)` the states are `(blank, g_1, blank, g_2, ..., g_N, blank)`,
/// `2N + 1` in total. Even 0-based positions are blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedGlossSeq {
    states: Vec<usize>,
}

impl ExtendedGlossSeq {
    pub fn new(glosses: &[usize], classes: usize) -> Result<Self, CtcError> {
        if glosses.is_empty() {
            return Err(CtcError::EmptyReference);
        }
        let mut states = Vec::with_capacity(glosses.len() * 2 + 1);
        states.push(BLANK);
        for &g in glosses {
            if g == BLANK {
                return Err(CtcError::BlankGloss);
            }
            if g >= classes {
                return Err(CtcError::UnknownGloss { gloss: g, classes });
            }
            states.push(g);
            states.push(BLANK);
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Class label of trellis state `s`.
    pub fn class(&self, s: usize) -> usize {
        self.states[s]
    }

    /// Earliest state a path may occupy one frame before being in state `s`.
    /// Blank states and repeated glosses can be entered only from the
    /// previous state or by staying; everything else may also skip the
    /// intervening blank.
    pub fn earliest_predecessor(&self, s: usize) -> usize {
        let skip_allowed =
            self.states[s] != BLANK && s >= 2 && self.states[s - 2] != self.states[s];
        if skip_allowed {
            s - 2
        } else {
            s.saturating_sub(1)
        }
    }

    /// States a path may legally finish in: the last gloss or the final
    /// blank.
    pub fn final_states(&self) -> [usize; 2] {
        [self.states.len() - 2, self.states.len() - 1]
    }
}
