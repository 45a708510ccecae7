//! Loss stack for window classifiers: instance-level and gloss-level
//! cross-entropy, the saliency loss built on foreground pooling of
//! up-sampled features, and the weighted-sum feature fusion op.
//!
//! The cross-entropy combinators operate on grids of true-class posteriors
//! shaped `M x K`: `M` label-homogeneous rows of `K` instances each. The
//! instance-level loss averages `-log p` over all cells; the gloss-level
//! loss first averages the probabilities within a row and takes the log of
//! that mean, which by concavity of the log never exceeds the instance
//! loss.

pub mod toy;

pub use toy::{
    train_toy, EpochMetrics, LossOptions, SamplingMode, ToyBatch, ToyError, ToyInstance, ToyModel,
    ToyRow, ToyTrainConfig, ToyTrainReport,
};

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("probability grid is empty or ragged")]
    BadGrid,
    #[error("posterior {value} at row {row}, column {col} outside (0, 1]")]
    DomainError { row: usize, col: usize, value: f64 },
    #[error("foreground of window [{w_b}, {w_e}] against parent [{t_b}, {t_e}] is empty")]
    EmptyForeground {
        t_b: usize,
        t_e: usize,
        w_b: usize,
        w_e: usize,
    },
    #[error("feature shapes differ: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("feature sequence has {rows} rows, expected {expected}")]
    BadFeatureShape { rows: usize, expected: usize },
}

fn check_grid(probs: &[Vec<f64>]) -> Result<(usize, usize), LossError> {
    if probs.is_empty() || probs[0].is_empty() {
        return Err(LossError::BadGrid);
    }
    let k = probs[0].len();
    for (row, r) in probs.iter().enumerate() {
        if r.len() != k {
            return Err(LossError::BadGrid);
        }
        for (col, &p) in r.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(LossError::DomainError { row, col, value: p });
            }
        }
    }
    Ok((probs.len(), k))
}

/// Instance-level cross-entropy: `-(1/(M*K)) sum_ij log p_ij`.
pub fn instance_ce(probs: &[Vec<f64>]) -> Result<f64, LossError> {
    let (m, k) = check_grid(probs)?;
    let sum: f64 = probs.iter().flatten().map(|p| p.ln()).sum();
    Ok(-sum / (m * k) as f64)
}

/// Gloss-level cross-entropy: `-(1/M) sum_i log((1/K) sum_j p_ij)`.
pub fn gloss_ce(probs: &[Vec<f64>]) -> Result<f64, LossError> {
    let (m, k) = check_grid(probs)?;
    let mut sum = 0.0;
    for row in probs {
        let mean: f64 = row.iter().sum::<f64>() / k as f64;
        sum += mean.ln();
    }
    Ok(-sum / m as f64)
}

/// The four-term training loss: instance and gloss cross-entropy of the
/// main head plus, when a saliency grid is given, the same two terms over
/// the foreground-pooled posteriors.
pub fn total_loss(main: &[Vec<f64>], saliency: Option<&[Vec<f64>]>) -> Result<f64, LossError> {
    let mut loss = instance_ce(main)? + gloss_ce(main)?;
    if let Some(sal) = saliency {
        loss += instance_ce(sal)? + gloss_ce(sal)?;
    }
    Ok(loss)
}

/// Row range of the up-sampled feature sequence covered by the foreground.
///
/// `t_b..=t_e` are the parent (pseudo-GT) bounds and `w_b..=w_e` the window
/// bounds, both absolute and inclusive. The foreground is their
/// intersection; with `a` and `b` its clip-relative start and
/// exclusive end, the slice is `ceil(beta*a/alpha) .. floor(beta*b/alpha)`,
/// clamped to the valid up-sampled rows.
///
/// The raw formula is monotone (a larger foreground never yields a smaller
/// slice) but can round to an empty range when `beta < alpha` and the
/// foreground is only a frame or two; that case reports `EmptyForeground`,
/// as does a disjoint parent/window pair.
pub fn foreground_slice(
    t_b: usize,
    t_e: usize,
    w_b: usize,
    w_e: usize,
    alpha: usize,
    beta: usize,
) -> Result<Range<usize>, LossError> {
    assert!(alpha >= 1 && beta >= 1, "alpha and beta must be positive");
    assert!(t_b <= t_e && w_b <= w_e, "inverted interval");
    let lo = t_b.max(w_b);
    let hi = t_e.min(w_e);
    if lo > hi {
        return Err(LossError::EmptyForeground { t_b, t_e, w_b, w_e });
    }
    let fg_start = lo - w_b;
    let fg_end_excl = hi - w_b + 1;
    let clip_len = w_e - w_b + 1;
    let rows_up = clip_len.div_ceil(alpha) * beta;

    let start = (beta * fg_start).div_ceil(alpha).min(rows_up);
    let end = (beta * fg_end_excl / alpha).min(rows_up);
    if end <= start {
        return Err(LossError::EmptyForeground { t_b, t_e, w_b, w_e });
    }
    Ok(start..end)
}

/// Elementwise convex combination `lambda * f_online + (1 - lambda) *
/// f_offline` of two equally shaped feature buffers.
///
/// # Panics
/// Panics unless `0 <= lambda <= 1`.
pub fn fuse_features(
    f_online: &[f64],
    f_offline: &[f64],
    lambda: f64,
) -> Result<Vec<f64>, LossError> {
    assert!((0.0..=1.0).contains(&lambda), "lambda must be in [0, 1]");
    if f_online.len() != f_offline.len() {
        return Err(LossError::ShapeMismatch {
            left: f_online.len(),
            right: f_offline.len(),
        });
    }
    Ok(f_online
        .iter()
        .zip(f_offline)
        .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions_cost_nothing() {
        let grid = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(instance_ce(&grid).unwrap(), 0.0);
        assert_eq!(gloss_ce(&grid).unwrap(), 0.0);
        assert_eq!(total_loss(&grid, Some(&grid)).unwrap(), 0.0);
    }

    #[test]
    fn total_loss_is_additive() {
        let main = vec![vec![0.6, 0.3], vec![0.8, 0.9]];
        let sal = vec![vec![0.5, 0.7], vec![0.4, 0.2]];
        // Without saliency the total collapses to the two main terms.
        let base = instance_ce(&main).unwrap() + gloss_ce(&main).unwrap();
        assert_eq!(total_loss(&main, None).unwrap(), base);
        let full = total_loss(&main, Some(&sal)).unwrap();
        let expected = base + instance_ce(&sal).unwrap() + gloss_ce(&sal).unwrap();
        assert!((full - expected).abs() < 1e-15);
    }

    #[test]
    fn instance_ce_direct_values() {
        let grid = vec![vec![0.5, 0.5]];
        assert!((instance_ce(&grid).unwrap() - 2.0f64.ln()).abs() < 1e-12);
        let grid = vec![vec![1.0], vec![(-1.0f64).exp()]];
        assert!((instance_ce(&grid).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gloss_ce_averages_before_log() {
        // A vanishing posterior pulls the instance loss to infinity but the
        // gloss loss only to log of the row mean.
        let grid = vec![vec![1.0, 1e-12]];
        let g = gloss_ce(&grid).unwrap();
        assert!((g - 2.0f64.ln()).abs() < 1e-9);
        assert!(instance_ce(&grid).unwrap() > g);
    }

    #[test]
    fn domain_violations_rejected() {
        let grid = vec![vec![0.5, 0.0]];
        assert!(matches!(
            instance_ce(&grid).unwrap_err(),
            LossError::DomainError { row: 0, col: 1, .. }
        ));
        assert!(matches!(
            gloss_ce(&grid).unwrap_err(),
            LossError::DomainError { .. }
        ));
        assert_eq!(instance_ce(&[]).unwrap_err(), LossError::BadGrid);
    }

    #[test]
    fn foreground_slice_examples() {
        // Foreground covering clip-relative frames [0, 16) at alpha 8 and
        // beta 4 pools up-sampled rows [0, 8).
        assert_eq!(foreground_slice(0, 15, 0, 15, 8, 4).unwrap(), 0..8);
        // Full-clip foreground covers every up-sampled row.
        assert_eq!(foreground_slice(0, 23, 0, 23, 8, 4).unwrap(), 0..12);
        // Disjoint parent and window have no foreground.
        assert!(matches!(
            foreground_slice(0, 3, 10, 15, 8, 4).unwrap_err(),
            LossError::EmptyForeground { .. }
        ));
    }

    #[test]
    fn foreground_slice_degenerate_rounding() {
        // A single-frame foreground at an unlucky phase rounds empty when
        // beta < alpha.
        assert!(matches!(
            foreground_slice(15, 15, 0, 15, 8, 4).unwrap_err(),
            LossError::EmptyForeground { .. }
        ));
        // With beta == alpha every non-empty foreground keeps a row.
        assert_eq!(foreground_slice(15, 15, 0, 15, 8, 8).unwrap(), 15..16);
    }

    #[test]
    fn fuse_features_endpoints() {
        let online = vec![2.0, 4.0];
        let offline = vec![0.0, 0.0];
        assert_eq!(fuse_features(&online, &offline, 0.0).unwrap(), offline);
        assert_eq!(fuse_features(&online, &offline, 1.0).unwrap(), online);
        assert_eq!(
            fuse_features(&online, &offline, 0.5).unwrap(),
            vec![1.0, 2.0]
        );
        assert!(matches!(
            fuse_features(&online, &[1.0], 0.5).unwrap_err(),
            LossError::ShapeMismatch { left: 2, right: 1 }
        ));
    }

    proptest! {
        // Jensen: the gloss-level loss never exceeds the instance-level
        // loss, with equality only for constant rows.
        #[test]
        fn gloss_never_exceeds_instance(
            m in 1usize..5,
            k in 1usize..6,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| rng.random::<f64>().max(1e-9)).collect())
                .collect();
            let inst = instance_ce(&grid).unwrap();
            let gloss = gloss_ce(&grid).unwrap();
            prop_assert!(gloss <= inst + 1e-12);
        }

        // Enlarging the foreground never shrinks the slice.
        #[test]
        fn foreground_slice_is_monotone(
            w_len in 4usize..40,
            fg_a in 0usize..20,
            fg_len in 1usize..20,
            grow_left in 0usize..5,
            grow_right in 0usize..5,
            alpha in 1usize..9,
            beta in 1usize..9,
        ) {
            let w_e = w_len - 1;
            let a = fg_a.min(w_e);
            let b = (a + fg_len - 1).min(w_e);
            let a2 = a.saturating_sub(grow_left);
            let b2 = (b + grow_right).min(w_e);
            let inner = foreground_slice(a, b, 0, w_e, alpha, beta);
            let outer = foreground_slice(a2, b2, 0, w_e, alpha, beta);
            if let (Ok(inner), Ok(outer)) = (inner, outer) {
                prop_assert!(outer.start <= inner.start);
                prop_assert!(outer.end >= inner.end);
            }
        }

        // Fusion is linear and idempotent on equal inputs.
        #[test]
        fn fusion_properties(lambda in 0.0f64..=1.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let fused = fuse_features(&[x], &[y], lambda).unwrap();
            prop_assert!((fused[0] - (lambda * x + (1.0 - lambda) * y)).abs() < 1e-12);
            let same = fuse_features(&[x], &[x], lambda).unwrap();
            prop_assert!((same[0] - x).abs() < 1e-12);
        }
    }
}
