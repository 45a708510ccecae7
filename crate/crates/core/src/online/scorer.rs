//! Window-level scorers: reduce a window of frame posteriors to one class
//! posterior vector.

use crate::prob::ProbMatrix;

/// Scores one window of frame posteriors. Windows may be shorter than the
/// configured size at the stream start or end; implementations must accept
/// any non-empty frame range.
pub trait WindowScorer {
    /// Posterior over all classes for the window `[start, end)` of `probs`.
    fn score(&self, probs: &ProbMatrix, start: usize, end: usize) -> Vec<f64>;
}

/// Renormalized per-class geometric mean of the frame posteriors.
///
/// Computed in log space with a floor on each frame probability so that a
/// hard zero in a single frame demotes a class instead of wiping out the
/// whole window; under one-hot rows the argmax becomes the class covering
/// the most frames. Constant rows are preserved exactly.
#[derive(Debug, Clone)]
pub struct GeoMeanScorer {
    pub floor: f64,
}

impl Default for GeoMeanScorer {
    fn default() -> Self {
        Self { floor: 1e-120 }
    }
}

impl WindowScorer for GeoMeanScorer {
    fn score(&self, probs: &ProbMatrix, start: usize, end: usize) -> Vec<f64> {
        assert!(start < end && end <= probs.frames(), "bad window range");
        let classes = probs.classes();
        let len = (end - start) as f64;
        let mut log_means = vec![0.0f64; classes];
        for t in start..end {
            let row = probs.row(t);
            for (c, &p) in row.iter().enumerate() {
                log_means[c] += p.max(self.floor).ln();
            }
        }
        let mut out: Vec<f64> = log_means.iter().map(|&l| (l / len).exp()).collect();
        let sum: f64 = out.iter().sum();
        if sum > 0.0 {
            for p in &mut out {
                *p /= sum;
            }
        }
        out
    }
}

/// Posterior of the window's center frame, unchanged.
#[derive(Debug, Clone, Default)]
pub struct ArgmaxCenterScorer;

impl WindowScorer for ArgmaxCenterScorer {
    fn score(&self, probs: &ProbMatrix, start: usize, end: usize) -> Vec<f64> {
        assert!(start < end && end <= probs.frames(), "bad window range");
        let center = start + (end - start - 1) / 2;
        probs.row(center).to_vec()
    }
}
