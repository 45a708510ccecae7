//! Model-agnostic toolkit for online continuous sequence recognition over
//! frame-wise gloss-probability streams.
//!
//! The crate is organized around a small set of domain types ([`ProbMatrix`],
//! [`SignSpan`], [`Dictionary`]) and the operations that connect them:
//!
//! * [`ctc`] — forced alignment of a probability stream against a reference
//!   gloss sequence, the CTC forward loss, brute-force oracles for both, and
//!   a streaming prefix beam decoder.
//! * [`dict`] — sign-dictionary construction from alignments, window
//!   augmentation, and the gloss-level mini-batch sampler.
//! * [`objectives`] — the instance/gloss cross-entropy losses, the saliency
//!   loss with foreground pooling, feature fusion, and a toy differentiable
//!   window classifier with hand-written gradients.
//! * [`online`] — the sliding-window online decoder with voting-based
//!   post-processing, the chained-CTC streaming baseline, and the wait-k
//!   emission scheduler.
//! * [`sim`] — a synthetic probability-stream generator with known ground
//!   truth, used as the oracle substrate for end-to-end tests.
//! * [`metrics`] — word error rate with S/D/I breakdown, boundary IoU, and
//!   latency statistics.

pub mod ctc;
pub mod dict;
pub mod metrics;
pub mod objectives;
pub mod online;
pub mod prob;
pub mod sim;
pub mod span;
pub mod vocab;

pub use prob::{decode_prb, encode_prb, MatrixError, PrbError, ProbMatrix};
pub use span::{DictEntry, Dictionary, PredictionEvent, SignSpan, SpanError, SpanKind};
pub use vocab::{GlossVocab, VocabError, BLANK};
