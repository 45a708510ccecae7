//! Brute-force enumeration oracles for forced alignment and the forward
//! loss.
//!
//! Both oracles walk every feasible label sequence explicitly (each such
//! sequence has exactly one decomposition into extended-sequence states, so
//! a depth-first walk over legal state transitions enumerates them without
//! duplicates or omissions). They never consult the dynamic-programming
//! tables they are used to check.

use super::align::AlignmentPath;
use super::{collapse_labels, CtcError, ExtendedGlossSeq};
use crate::prob::ProbMatrix;

/// Enumeration guard: maximum number of frames.
pub const ORACLE_MAX_FRAMES: usize = 12;
/// Enumeration guard: maximum number of reference glosses.
pub const ORACLE_MAX_GLOSSES: usize = 4;

struct Walk<'a> {
    matrix: &'a ProbMatrix,
    ext: &'a ExtendedGlossSeq,
    frames: usize,
}

struct Best {
    score_log: f64,
    states: Vec<usize>,
}

impl Walk<'_> {
    /// Visits every feasible state sequence, carrying the running log score
    /// and linear-space probability.
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        t: usize,
        state: usize,
        score_log: f64,
        prob: f64,
        states: &mut Vec<usize>,
        total: &mut f64,
        best: &mut Option<Best>,
    ) {
        states.push(state);
        let lp = self.matrix.get(t, self.ext.class(state)).ln();
        let score_log = score_log + lp;
        let prob = prob * self.matrix.get(t, self.ext.class(state));
        if t + 1 == self.frames {
            let [fin_a, fin_b] = self.ext.final_states();
            if state == fin_a || state == fin_b {
                *total += prob;
                if prob > 0.0 && better(best, score_log, states) {
                    *best = Some(Best {
                        score_log,
                        states: states.clone(),
                    });
                }
            }
        } else {
            for next in state..self.ext.len().min(state + 3) {
                if self.ext.earliest_predecessor(next) <= state {
                    self.dfs(t + 1, next, score_log, prob, states, total, best);
                }
            }
        }
        states.pop();
    }
}

/// Score ties resolve toward the state sequence that is lexicographically
/// larger when read from the last frame backwards, matching the alignment
/// search's preference for the larger state index at every backtrack step.
fn better(best: &Option<Best>, score_log: f64, states: &[usize]) -> bool {
    match best {
        None => true,
        Some(b) => {
            if score_log != b.score_log {
                score_log > b.score_log
            } else {
                states
                    .iter()
                    .rev()
                    .zip(b.states.iter().rev())
                    .find(|(a, b)| a != b)
                    .map(|(a, b)| a > b)
                    .unwrap_or(false)
            }
        }
    }
}

fn run_walk(matrix: &ProbMatrix, glosses: &[usize]) -> Result<(f64, Option<Best>), CtcError> {
    if matrix.frames() > ORACLE_MAX_FRAMES || glosses.len() > ORACLE_MAX_GLOSSES {
        return Err(CtcError::OracleTooLarge {
            frames: matrix.frames(),
            glosses: glosses.len(),
        });
    }
    let ext = ExtendedGlossSeq::new(glosses, matrix.classes())?;
    let walk = Walk {
        matrix,
        ext: &ext,
        frames: matrix.frames(),
    };
    let mut total = 0.0;
    let mut best = None;
    let mut states = Vec::with_capacity(matrix.frames());
    for start in [0usize, 1usize] {
        walk.dfs(0, start, 0.0, 1.0, &mut states, &mut total, &mut best);
    }
    Ok((total, best))
}

/// Returns the maximum-probability label sequence whose collapse equals
/// `glosses`, by exhaustive enumeration. Errors with `OracleTooLarge` beyond
/// [`ORACLE_MAX_FRAMES`] x [`ORACLE_MAX_GLOSSES`] and `NoFeasiblePath` when
/// no sequence is feasible or all of them carry zero probability.
pub fn brute_force_best_path(
    matrix: &ProbMatrix,
    glosses: &[usize],
) -> Result<AlignmentPath, CtcError> {
    let (_, best) = run_walk(matrix, glosses)?;
    match best {
        Some(b) => {
            let labels: Vec<usize> = {
                let ext = ExtendedGlossSeq::new(glosses, matrix.classes())?;
                b.states.iter().map(|&s| ext.class(s)).collect()
            };
            debug_assert_eq!(collapse_labels(&labels), glosses);
            Ok(AlignmentPath {
                labels,
                score_log: b.score_log,
            })
        }
        None => Err(CtcError::NoFeasiblePath {
            frames: matrix.frames(),
            min_frames: super::min_alignment_frames(glosses),
        }),
    }
}

/// Total probability mass over every feasible label sequence, summed in
/// linear space. Errors as [`brute_force_best_path`].
pub fn brute_force_total(matrix: &ProbMatrix, glosses: &[usize]) -> Result<f64, CtcError> {
    let (total, best) = run_walk(matrix, glosses)?;
    if best.is_none() {
        return Err(CtcError::NoFeasiblePath {
            frames: matrix.frames(),
            min_frames: super::min_alignment_frames(glosses),
        });
    }
    Ok(total)
}
