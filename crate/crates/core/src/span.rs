//! Sign spans, dictionaries, and prediction events.
//!
//! Frame indices are 0-based and inclusive at both ends. A [`SignSpan`] ties
//! a frame interval of one video to a gloss class; a [`Dictionary`] groups
//! spans by gloss and keeps background (blank-region) instances in a
//! separate section so that the per-gloss entries never carry the blank
//! class.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{GlossVocab, BLANK};

#[derive(Debug, Error, PartialEq)]
pub enum SpanError {
    #[error("span has t_b {t_b} > t_e {t_e}")]
    InvertedBounds { t_b: usize, t_e: usize },
    #[error("gloss class {gloss} not in vocabulary of {classes} classes")]
    UnknownGloss { gloss: usize, classes: usize },
    #[error("blank class is not a valid dictionary gloss")]
    BlankGloss,
    #[error("dictionary record {line}: {message}")]
    BadRecord { line: usize, message: String },
}

/// One isolated sign: a video id, an inclusive frame interval, and a gloss
/// class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSpan {
    pub video_id: String,
    pub t_b: usize,
    pub t_e: usize,
    pub gloss: usize,
}

impl SignSpan {
    pub fn new(
        video_id: impl Into<String>,
        t_b: usize,
        t_e: usize,
        gloss: usize,
    ) -> Result<Self, SpanError> {
        if t_b > t_e {
            return Err(SpanError::InvertedBounds { t_b, t_e });
        }
        Ok(Self {
            video_id: video_id.into(),
            t_b,
            t_e,
            gloss,
        })
    }

    /// Span length in frames, inclusive of both ends.
    pub fn len(&self) -> usize {
        self.t_e - self.t_b + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interval intersection-over-union with another span, on frame counts.
    /// Video ids and glosses are not considered.
    pub fn iou(&self, other: &SignSpan) -> f64 {
        interval_iou((self.t_b, self.t_e), (other.t_b, other.t_e))
    }
}

/// IoU of two inclusive integer intervals.
pub fn interval_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter_lo = a.0.max(b.0);
    let inter_hi = a.1.min(b.1);
    if inter_lo > inter_hi {
        return 0.0;
    }
    let inter = (inter_hi - inter_lo + 1) as f64;
    let len_a = (a.1 - a.0 + 1) as f64;
    let len_b = (b.1 - b.0 + 1) as f64;
    inter / (len_a + len_b - inter)
}

/// Provenance of a dictionary instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    PseudoGt,
    Augmented,
}

/// One dictionary instance: a span, its provenance, and (for augmented
/// instances built in-process) the pseudo-GT parent it was cropped around.
///
/// The parent is an in-memory link only; the on-disk record format does not
/// carry it, so dictionaries loaded from disk have `parent = None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub span: SignSpan,
    pub kind: SpanKind,
    pub parent: Option<SignSpan>,
}

/// On-disk JSON-lines record, one per span.
#[derive(Serialize, Deserialize)]
struct SpanRecord {
    video_id: String,
    t_b: usize,
    t_e: usize,
    gloss: usize,
    kind: SpanKind,
}

/// Map from gloss class to sign instances, plus a background section for
/// blank-region instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    vocab: GlossVocab,
    entries: BTreeMap<usize, Vec<DictEntry>>,
    background: Vec<DictEntry>,
}

impl Dictionary {
    pub fn new(vocab: GlossVocab) -> Self {
        Self {
            vocab,
            entries: BTreeMap::new(),
            background: Vec::new(),
        }
    }

    pub fn vocab(&self) -> &GlossVocab {
        &self.vocab
    }

    /// Inserts a gloss instance. The blank class is rejected; background
    /// instances go through [`Dictionary::insert_background`].
    pub fn insert(
        &mut self,
        span: SignSpan,
        kind: SpanKind,
        parent: Option<SignSpan>,
    ) -> Result<(), SpanError> {
        if span.gloss == BLANK {
            return Err(SpanError::BlankGloss);
        }
        if !self.vocab.contains_class(span.gloss) {
            return Err(SpanError::UnknownGloss {
                gloss: span.gloss,
                classes: self.vocab.class_count(),
            });
        }
        self.entries
            .entry(span.gloss)
            .or_default()
            .push(DictEntry { span, kind, parent });
        Ok(())
    }

    /// Inserts a background (blank-region) instance.
    pub fn insert_background(
        &mut self,
        span: SignSpan,
        kind: SpanKind,
        parent: Option<SignSpan>,
    ) -> Result<(), SpanError> {
        if span.gloss != BLANK {
            return Err(SpanError::UnknownGloss {
                gloss: span.gloss,
                classes: self.vocab.class_count(),
            });
        }
        self.background.push(DictEntry { span, kind, parent });
        Ok(())
    }

    /// Number of distinct glosses with at least one instance, excluding the
    /// background section.
    pub fn n_glosses(&self) -> usize {
        self.entries.len()
    }

    /// Gloss classes with at least one instance, ascending.
    pub fn glosses(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn instances(&self, gloss: usize) -> &[DictEntry] {
        self.entries.get(&gloss).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn background(&self) -> &[DictEntry] {
        &self.background
    }

    pub fn total_instances(&self) -> usize {
        self.entries.values().map(Vec::len).sum::<usize>() + self.background.len()
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &DictEntry> {
        self.entries
            .values()
            .flatten()
            .chain(self.background.iter())
    }

    /// Writes all instances as JSON lines, gloss sections in ascending class
    /// order, background last. One record per span:
    /// `{"video_id","t_b","t_e","gloss","kind"}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in self.iter_all() {
            let record = SpanRecord {
                video_id: entry.span.video_id.clone(),
                t_b: entry.span.t_b,
                t_e: entry.span.t_e,
                gloss: entry.span.gloss,
                kind: entry.kind,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a dictionary back from JSON lines. Parent links are not part of
    /// the record format and come back as `None`.
    pub fn read_jsonl<R: BufRead>(vocab: GlossVocab, input: R) -> Result<Self, SpanError> {
        let mut dict = Dictionary::new(vocab);
        for (idx, line) in input.lines().enumerate() {
            let line = line.map_err(|e| SpanError::BadRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SpanRecord =
                serde_json::from_str(&line).map_err(|e| SpanError::BadRecord {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            let span = SignSpan::new(record.video_id, record.t_b, record.t_e, record.gloss)
                .map_err(|e| SpanError::BadRecord {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if span.gloss == BLANK {
                dict.insert_background(span, record.kind, None)
                    .map_err(|e| SpanError::BadRecord {
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
            } else {
                dict.insert(span, record.kind, None)
                    .map_err(|e| SpanError::BadRecord {
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
            }
        }
        Ok(dict)
    }
}

/// One emitted online prediction. `wall_time_ms` is the measured processing
/// time of the window that triggered the emission; it is zeroed when timing
/// capture is disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEvent {
    pub gloss: usize,
    pub window_center_frame: usize,
    pub wall_time_ms: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> GlossVocab {
        GlossVocab::new(vec!["A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn span_bounds_validated() {
        assert!(SignSpan::new("v", 3, 3, 1).is_ok());
        assert_eq!(
            SignSpan::new("v", 4, 3, 1).unwrap_err(),
            SpanError::InvertedBounds { t_b: 4, t_e: 3 }
        );
    }

    #[test]
    fn interval_iou_cases() {
        assert_eq!(interval_iou((0, 3), (0, 3)), 1.0);
        assert_eq!(interval_iou((0, 3), (2, 5)), 2.0 / 6.0);
        assert_eq!(interval_iou((0, 1), (3, 4)), 0.0);
    }

    #[test]
    fn dictionary_rejects_blank_and_unknown() {
        let mut d = Dictionary::new(vocab());
        let blank = SignSpan::new("v", 0, 1, BLANK).unwrap();
        assert_eq!(
            d.insert(blank, SpanKind::PseudoGt, None).unwrap_err(),
            SpanError::BlankGloss
        );
        let bad = SignSpan::new("v", 0, 1, 7).unwrap();
        assert!(matches!(
            d.insert(bad, SpanKind::PseudoGt, None).unwrap_err(),
            SpanError::UnknownGloss { gloss: 7, .. }
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut d = Dictionary::new(vocab());
        d.insert(
            SignSpan::new("v0", 1, 2, 1).unwrap(),
            SpanKind::PseudoGt,
            None,
        )
        .unwrap();
        d.insert(
            SignSpan::new("v0", 0, 3, 2).unwrap(),
            SpanKind::Augmented,
            None,
        )
        .unwrap();
        d.insert_background(
            SignSpan::new("v0", 3, 4, BLANK).unwrap(),
            SpanKind::PseudoGt,
            None,
        )
        .unwrap();

        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"video_id":"v0","t_b":1,"t_e":2,"gloss":1,"kind":"pseudo_gt"}"#
        );

        let back = Dictionary::read_jsonl(vocab(), &buf[..]).unwrap();
        assert_eq!(back.n_glosses(), 2);
        assert_eq!(back.background().len(), 1);
        assert_eq!(back.instances(1)[0].span, d.instances(1)[0].span);
        assert_eq!(back.total_instances(), 3);
    }

    #[test]
    fn event_jsonl_shape() {
        let e = PredictionEvent {
            gloss: 3,
            window_center_frame: 17,
            wall_time_ms: 0.25,
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"gloss":3,"window_center_frame":17,"wall_time_ms":0.25}"#
        );
    }
}
