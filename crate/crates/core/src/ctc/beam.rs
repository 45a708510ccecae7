//! CTC prefix beam search with a carryable decoder state.
//!
//! The decoder keeps, per collapsed prefix, the log probability of all paths
//! that end in a blank and of all paths that end in the prefix's last label.
//! Because the full hypothesis set is the state, decoding a stream window by
//! window while carrying the returned [`BeamState`] is exact whenever the
//! beam is wide enough to hold every distinct prefix.

use std::collections::BTreeMap;

use crate::prob::ProbMatrix;
use crate::vocab::BLANK;

/// One beam hypothesis: a collapsed prefix and its two path masses.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub prefix: Vec<usize>,
    pub log_prob_blank: f64,
    pub log_prob_nonblank: f64,
}

impl BeamHypothesis {
    pub fn total_log_prob(&self) -> f64 {
        log_add(self.log_prob_blank, self.log_prob_nonblank)
    }
}

/// Decoder state carried between windows: hypotheses sorted by total log
/// probability, best first, with distinct prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub hypotheses: Vec<BeamHypothesis>,
}

impl Default for BeamState {
    fn default() -> Self {
        Self {
            hypotheses: vec![BeamHypothesis {
                prefix: Vec::new(),
                log_prob_blank: 0.0,
                log_prob_nonblank: f64::NEG_INFINITY,
            }],
        }
    }
}

impl BeamState {
    /// The best collapsed prefix, empty for a fresh state.
    pub fn best_prefix(&self) -> &[usize] {
        self.hypotheses
            .first()
            .map(|h| h.prefix.as_slice())
            .unwrap_or(&[])
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Runs prefix beam search over the frames of `matrix`, seeded from `state`
/// when given. Returns the best collapsed prefix and the final state for
/// chaining the next window.
///
/// # Panics
/// Panics if `beam_width` is zero.
#[allow(clippy::needless_range_loop)]
pub fn beam_decode(
    matrix: &ProbMatrix,
    beam_width: usize,
    state: Option<BeamState>,
) -> (Vec<usize>, BeamState) {
    assert!(beam_width >= 1, "beam width must be at least 1");
    let mut beam = state.unwrap_or_default();
    let classes = matrix.classes();

    for t in 0..matrix.frames() {
        let row = matrix.row(t);
        let mut next: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
        for hyp in &beam.hypotheses {
            let total = hyp.total_log_prob();
            if total == f64::NEG_INFINITY {
                continue;
            }
            // Blank extends the same prefix from either mass.
            let lp_blank = row[BLANK].ln();
            merge(&mut next, &hyp.prefix, total + lp_blank, true);
            for c in 1..classes {
                let lp = row[c].ln();
                if hyp.prefix.last() == Some(&c) {
                    // Repeating the last label without an intervening blank
                    // stays in the same prefix; through a blank it starts a
                    // new copy of the label.
                    merge(&mut next, &hyp.prefix, hyp.log_prob_nonblank + lp, false);
                    let mut extended = hyp.prefix.clone();
                    extended.push(c);
                    merge(&mut next, &extended, hyp.log_prob_blank + lp, false);
                } else {
                    let mut extended = hyp.prefix.clone();
                    extended.push(c);
                    merge(&mut next, &extended, total + lp, false);
                }
            }
        }

        let mut hypotheses: Vec<BeamHypothesis> = next
            .into_iter()
            .map(|(prefix, (b, nb))| BeamHypothesis {
                prefix,
                log_prob_blank: b,
                log_prob_nonblank: nb,
            })
            .collect();
        // Deterministic order: score descending, prefix ascending on ties
        // (the BTreeMap already yields prefixes in ascending order, and the
        // sort is stable).
        hypotheses.sort_by(|a, b| {
            b.total_log_prob()
                .partial_cmp(&a.total_log_prob())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        hypotheses.truncate(beam_width);
        beam = BeamState { hypotheses };
    }

    (beam.best_prefix().to_vec(), beam)
}

fn merge(map: &mut BTreeMap<Vec<usize>, (f64, f64)>, prefix: &[usize], lp: f64, blank: bool) {
    if lp == f64::NEG_INFINITY {
        return;
    }
    let slot = map
        .entry(prefix.to_vec())
        .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
    if blank {
        slot.0 = log_add(slot.0, lp);
    } else {
        slot.1 = log_add(slot.1, lp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[Vec<f64>]) -> ProbMatrix {
        ProbMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn greedy_collapse() {
        let m = matrix(&[vec![0.1, 0.9], vec![0.1, 0.9]]);
        let (seq, _) = beam_decode(&m, 1, None);
        assert_eq!(seq, vec![1]);
    }

    #[test]
    fn all_blank_gives_empty_sequence() {
        let m = matrix(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let (seq, _) = beam_decode(&m, 5, None);
        assert!(seq.is_empty());
    }

    #[test]
    fn chained_windows_equal_whole_stream() {
        let rows = vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.7, 0.1],
            vec![0.5, 0.2, 0.3],
            vec![0.1, 0.2, 0.7],
        ];
        let whole = matrix(&rows);
        let first = matrix(&rows[0..2]);
        let second = matrix(&rows[2..4]);

        // A beam wide enough for every distinct prefix makes chaining exact.
        let width = 64;
        let (full_seq, full_state) = beam_decode(&whole, width, None);
        let (_, mid_state) = beam_decode(&first, width, None);
        let (chained_seq, chained_state) = beam_decode(&second, width, Some(mid_state));
        assert_eq!(chained_seq, full_seq);
        assert_eq!(chained_state.hypotheses.len(), full_state.hypotheses.len());
        for (a, b) in chained_state
            .hypotheses
            .iter()
            .zip(full_state.hypotheses.iter())
        {
            assert_eq!(a.prefix, b.prefix);
            assert!((a.total_log_prob() - b.total_log_prob()).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_label_requires_blank_gap() {
        // Strong A, brief blank, strong A again: the best prefix is (A, A).
        let m = matrix(&[vec![0.1, 0.9], vec![0.8, 0.2], vec![0.1, 0.9]]);
        let (seq, _) = beam_decode(&m, 5, None);
        assert_eq!(seq, vec![1, 1]);
    }
}
