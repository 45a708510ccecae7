//! Online inference: sliding-window driver, voting-based post-processing,
//! the chained-CTC streaming baseline, and the wait-k emission scheduler.
//!
//! The post-processor keeps a bounded queue of the last `B` window
//! predictions. Once the queue is full, every new prediction triggers one
//! voting round: the strict majority class of the bag (or blank when no
//! class clears `B/2`) is emitted unless it is blank or repeats the last
//! emission without an intervening blank vote, then the oldest prediction
//! is dropped. Nothing is ever emitted from a partially filled bag, so the
//! final `B - 1` window predictions of a stream can never vote.

mod scorer;
mod waitk;

pub use scorer::{ArgmaxCenterScorer, GeoMeanScorer, WindowScorer};
pub use waitk::{
    waitk_schedule, IdentityTranslator, Translator, WaitkAction, WaitkRun, DEFAULT_WAITK,
};

use std::collections::VecDeque;
use std::time::Instant;

use thiserror::Error;

use crate::ctc::{beam_decode, BeamState};
use crate::prob::ProbMatrix;
use crate::span::PredictionEvent;
use crate::vocab::BLANK;

#[derive(Debug, Error, PartialEq)]
pub enum OnlineError {
    #[error("invalid online config: {0}")]
    Config(String),
    #[error("voting bag holds {got} predictions, expected {expected}")]
    BagSizeMismatch { expected: usize, got: usize },
}

/// Sliding-window configuration. Defaults match the reference operating
/// point: window 16, stride 1, voting bag 7, 20 ms per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub window: usize,
    pub stride: usize,
    pub bag: usize,
    pub frame_period_ms: f64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            window: 16,
            stride: 1,
            bag: 7,
            frame_period_ms: 20.0,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<(), OnlineError> {
        if self.window < 1 {
            return Err(OnlineError::Config("window must be at least 1".into()));
        }
        if self.stride < 1 {
            return Err(OnlineError::Config("stride must be at least 1".into()));
        }
        if self.bag < 1 || self.bag.is_multiple_of(2) {
            return Err(OnlineError::Config(
                "voting bag must be odd and >= 1".into(),
            ));
        }
        if !self.frame_period_ms.is_finite() || self.frame_period_ms <= 0.0 {
            return Err(OnlineError::Config("frame period must be positive".into()));
        }
        Ok(())
    }
}

/// Minimum theoretical delay before any prediction: the time span a full
/// window covers.
pub fn algorithmic_latency(cfg: &OnlineConfig) -> f64 {
    cfg.window as f64 * cfg.frame_period_ms
}

/// Strict-majority vote over a full bag: the class appearing more than
/// `bag_size / 2` times, or blank when no class clears that bar.
pub fn vote(bag: &[usize], bag_size: usize) -> Result<usize, OnlineError> {
    if bag.len() != bag_size {
        return Err(OnlineError::BagSizeMismatch {
            expected: bag_size,
            got: bag.len(),
        });
    }
    for &candidate in bag {
        let count = bag.iter().filter(|&&p| p == candidate).count();
        if 2 * count > bag_size {
            return Ok(candidate);
        }
    }
    Ok(BLANK)
}

/// Mutable state of the online post-processor.
#[derive(Debug, Clone, PartialEq)]
pub struct PostState {
    bag_size: usize,
    raw: VecDeque<usize>,
    temp: usize,
    output: Vec<usize>,
}

impl PostState {
    pub fn new(bag_size: usize) -> Self {
        Self {
            bag_size,
            raw: VecDeque::with_capacity(bag_size),
            temp: BLANK,
            // Blank sentinel so the first comparison against the last
            // emission is well defined.
            output: vec![BLANK],
        }
    }

    /// Emitted classes so far, sentinel stripped.
    pub fn output(&self) -> &[usize] {
        &self.output[1..]
    }

    /// Result of the last completed voting round, blank before the first.
    pub fn last_vote(&self) -> usize {
        self.temp
    }

    fn queue_len(&self) -> usize {
        self.raw.len()
    }
}

/// Feeds one window prediction through the post-processor. Returns the
/// emitted class when the bag was full and the vote survived both the
/// background and the deduplication checks.
///
/// A repeated gloss is re-emitted only when a blank voting result occurred
/// since its last emission.
pub fn post_step(state: &mut PostState, prediction: usize) -> Option<usize> {
    state.raw.push_back(prediction);
    if state.raw.len() < state.bag_size {
        return None;
    }
    let bag: Vec<usize> = state.raw.iter().copied().collect();
    let voted = vote(&bag, state.bag_size).expect("queue is exactly bag-sized");
    let mut emitted = None;
    if voted != BLANK && (voted != *state.output.last().unwrap() || state.temp == BLANK) {
        state.output.push(voted);
        emitted = Some(voted);
    }
    state.temp = voted;
    state.raw.pop_front();
    emitted
}

/// Everything one online pass produces: the emitted events, the voting
/// trace, and the measured per-window processing times.
#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub events: Vec<PredictionEvent>,
    /// Per-window argmax predictions, in window order.
    pub window_predictions: Vec<usize>,
    /// Result of every completed voting round, in order.
    pub votes: Vec<usize>,
    /// Scorer plus post-processing time per window, milliseconds.
    pub window_times_ms: Vec<f64>,
    pub num_windows: usize,
}

impl OnlineRun {
    /// Emitted gloss sequence.
    pub fn sequence(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.gloss).collect()
    }
}

/// Runs the sliding-window online decoder over a probability stream.
///
/// Windows start at frames `0, S, 2S, ...`; the window at `s` covers
/// `[s, min(s + W, T))`, so windows near the end of the stream shrink
/// instead of padding. Each window's scorer argmax feeds the
/// post-processor; emissions carry the window's center frame and measured
/// processing time. With `capture_timing` off the wall times are zeroed,
/// which keeps outputs byte-reproducible.
pub fn run_online(
    probs: &ProbMatrix,
    scorer: &dyn WindowScorer,
    cfg: &OnlineConfig,
    capture_timing: bool,
) -> Result<OnlineRun, OnlineError> {
    cfg.validate()?;
    let mut state = PostState::new(cfg.bag);
    let mut events = Vec::new();
    let mut window_predictions = Vec::new();
    let mut votes = Vec::new();
    let mut window_times_ms = Vec::new();

    let mut start = 0usize;
    while start < probs.frames() {
        let end = (start + cfg.window).min(probs.frames());
        let began = Instant::now();
        let posterior = scorer.score(probs, start, end);
        debug_assert_eq!(posterior.len(), probs.classes());
        let prediction = argmax(&posterior);
        window_predictions.push(prediction);
        let will_vote = state.queue_len() + 1 >= cfg.bag;
        let emitted = post_step(&mut state, prediction);
        let elapsed_ms = if capture_timing {
            began.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        window_times_ms.push(elapsed_ms);
        if will_vote {
            votes.push(state.last_vote());
        }
        if let Some(gloss) = emitted {
            events.push(PredictionEvent {
                gloss,
                window_center_frame: start + (end - start - 1) / 2,
                wall_time_ms: elapsed_ms,
            });
        }
        start += cfg.stride;
    }

    Ok(OnlineRun {
        events,
        window_predictions,
        votes,
        num_windows: window_times_ms.len(),
        window_times_ms,
    })
}

/// Index of the maximum value. Ties resolve to the largest class index,
/// biasing boundary windows toward signs over the background class (the
/// same direction as the alignment search's tie rule).
fn argmax(posterior: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in posterior.iter().enumerate() {
        if p >= posterior[best] {
            best = i;
        }
    }
    best
}

/// Streaming CTC baseline: the stream is consumed in consecutive
/// window-sized chunks, each decoded by prefix beam search seeded with the
/// previous chunk's decoder state. Returns the final collapsed sequence.
///
/// With `post_process` the baseline instead runs through the same voting
/// post-processor as [`run_online`]: each chunk contributes one
/// window-level prediction (the last gloss its decode appended, or blank
/// when the prefix did not grow).
pub fn run_online_ctc_baseline(
    probs: &ProbMatrix,
    cfg: &OnlineConfig,
    beam_width: usize,
    post_process: bool,
) -> Result<Vec<usize>, OnlineError> {
    cfg.validate()?;
    let mut state: Option<BeamState> = None;
    let mut prefix_len = 0usize;
    let mut post = PostState::new(cfg.bag);
    let mut post_output = Vec::new();
    let mut best = Vec::new();

    let mut start = 0usize;
    while start < probs.frames() {
        let end = (start + cfg.window).min(probs.frames());
        let chunk = probs.slice_rows(start, end);
        let (prefix, next_state) = beam_decode(&chunk, beam_width, state.take());
        if post_process {
            let window_pred = if prefix.len() > prefix_len {
                *prefix.last().unwrap()
            } else {
                BLANK
            };
            if let Some(gloss) = post_step(&mut post, window_pred) {
                post_output.push(gloss);
            }
        }
        prefix_len = prefix.len();
        best = prefix;
        state = Some(next_state);
        start = end;
    }

    Ok(if post_process { post_output } else { best })
}
