//! Evaluation: word error rate with an S/D/I breakdown, boundary IoU for
//! segmentation quality, and latency statistics.

use serde::Serialize;
use thiserror::Error;

use crate::online::{algorithmic_latency, OnlineConfig};
use crate::span::{PredictionEvent, SignSpan};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference sequence is empty")]
    EmptyReference,
    #[error("no events to report on")]
    NoEvents,
}

/// Word error rate with its edit breakdown. The rate is unclamped and can
/// exceed 1 when the hypothesis inserts more than the reference holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WerResult {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl WerResult {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer(&self) -> f64 {
        self.edits() as f64 / self.ref_len as f64
    }
}

/// Minimum-edit alignment of `hypothesis` against `reference`, counting
/// substitutions, deletions, and insertions. Ties in the backtrack prefer
/// substitution over insertion over deletion.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerResult, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        dist[i * width] = i;
    }
    for (j, slot) in dist[..width].iter_mut().enumerate() {
        *slot = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            let diag = dist[(i - 1) * width + j - 1] + sub_cost;
            let ins = dist[i * width + j - 1] + 1;
            let del = dist[(i - 1) * width + j] + 1;
            dist[i * width + j] = diag.min(ins).min(del);
        }
    }

    let mut substitutions = 0;
    let mut deletions = 0;
    let mut insertions = 0;
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if dist[(i - 1) * width + j - 1] + sub_cost == here {
                substitutions += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i * width + j - 1] + 1 == here {
            insertions += 1;
            j -= 1;
            continue;
        }
        deletions += 1;
        i -= 1;
    }

    Ok(WerResult {
        substitutions,
        deletions,
        insertions,
        ref_len: n,
    })
}

/// Mean interval IoU between two span lists, matching same-gloss spans
/// greedily in order. Unmatched spans on either side contribute zero to the
/// mean; the denominator counts matched pairs once and unmatched spans once
/// each.
pub fn boundary_iou(predicted: &[SignSpan], truth: &[SignSpan]) -> f64 {
    let mut ious = Vec::new();
    let mut matched_pred = vec![false; predicted.len()];
    let mut cursor = 0usize;
    let mut matched = 0usize;
    for t in truth {
        let mut found = None;
        for (p_idx, p) in predicted.iter().enumerate().skip(cursor) {
            if !matched_pred[p_idx] && p.gloss == t.gloss {
                found = Some(p_idx);
                break;
            }
        }
        if let Some(p_idx) = found {
            matched_pred[p_idx] = true;
            cursor = p_idx + 1;
            matched += 1;
            ious.push(predicted[p_idx].iou(t));
        } else {
            ious.push(0.0);
        }
    }
    let unmatched_pred = predicted.len() - matched;
    let denom = ious.len() + unmatched_pred;
    if denom == 0 {
        return 0.0;
    }
    ious.iter().sum::<f64>() / denom as f64
}

/// Latency summary: algorithmic latency from the config and window
/// processing latency percentiles over the events' measured wall times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyReport {
    pub al_ms: f64,
    pub wpl_p50_ms: f64,
    pub wpl_p95_ms: f64,
    pub wpl_max_ms: f64,
}

pub fn latency_report(
    events: &[PredictionEvent],
    cfg: &OnlineConfig,
) -> Result<LatencyReport, MetricsError> {
    if events.is_empty() {
        return Err(MetricsError::NoEvents);
    }
    let mut times: Vec<f64> = events.iter().map(|e| e.wall_time_ms).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(LatencyReport {
        al_ms: algorithmic_latency(cfg),
        wpl_p50_ms: percentile(&times, 50.0),
        wpl_p95_ms: percentile(&times, 95.0),
        wpl_max_ms: *times.last().unwrap(),
    })
}

/// Nearest-rank percentile over pre-sorted ascending values.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
