//! CTC forward loss: negative log of the total probability mass over all
//! feasible alignment paths.

use super::{min_alignment_frames, CtcError, ExtendedGlossSeq};
use crate::prob::ProbMatrix;

/// Adds probabilities in log space.
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

/// Computes `-log sum_paths prod_t p_t(theta_t)` over all feasible alignment
/// paths of `matrix` against `glosses`, in log space with log-sum-exp.
#[allow(clippy::needless_range_loop)]
pub fn ctc_forward_loss(matrix: &ProbMatrix, glosses: &[usize]) -> Result<f64, CtcError> {
    let ext = ExtendedGlossSeq::new(glosses, matrix.classes())?;
    let frames = matrix.frames();
    let min_frames = min_alignment_frames(glosses);
    if frames < min_frames {
        return Err(CtcError::NoFeasiblePath { frames, min_frames });
    }

    let n_states = ext.len();
    let lp = |t: usize, s: usize| matrix.get(t, ext.class(s)).ln();

    let mut prev = vec![f64::NEG_INFINITY; n_states];
    let mut curr = vec![f64::NEG_INFINITY; n_states];
    prev[0] = lp(0, 0);
    prev[1] = lp(0, 1);
    for t in 1..frames {
        for s in 0..n_states {
            let lo = ext.earliest_predecessor(s);
            let mut acc = f64::NEG_INFINITY;
            for k in lo..=s {
                acc = log_add(acc, prev[k]);
            }
            curr[s] = lp(t, s) + acc;
        }
        std::mem::swap(&mut prev, &mut curr);
    }

    let [fin_a, fin_b] = ext.final_states();
    let total = log_add(prev[fin_a], prev[fin_b]);
    if total == f64::NEG_INFINITY {
        return Err(CtcError::NoFeasiblePath { frames, min_frames });
    }
    Ok(-total)
}
