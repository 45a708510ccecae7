//! Gloss vocabulary with a reserved blank/background class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class index of the blank/background class. Fixed at 0 in every
/// probability matrix, alignment path, and prediction stream.
pub const BLANK: usize = 0;

/// Token used when rendering the blank class as text.
pub const BLANK_TOKEN: &str = "<blank>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("vocabulary must contain at least one label")]
    Empty,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label `{0}` collides with the reserved blank token")]
    ReservedLabel(String),
}

/// Ordered set of gloss labels. Label `i` owns class index `i + 1`; class 0
/// is the blank class and never appears among the labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct GlossVocab {
    labels: Vec<String>,
}

/// On-disk shape of the sidecar vocabulary file: `{"labels": [...]}`.
#[derive(Serialize, Deserialize)]
struct VocabFile {
    labels: Vec<String>,
}

impl TryFrom<VocabFile> for GlossVocab {
    type Error = VocabError;

    fn try_from(file: VocabFile) -> Result<Self, VocabError> {
        GlossVocab::new(file.labels)
    }
}

impl From<GlossVocab> for VocabFile {
    fn from(vocab: GlossVocab) -> Self {
        VocabFile {
            labels: vocab.labels,
        }
    }
}

impl GlossVocab {
    pub fn new(labels: Vec<String>) -> Result<Self, VocabError> {
        if labels.is_empty() {
            return Err(VocabError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if label == BLANK_TOKEN {
                return Err(VocabError::ReservedLabel(label.clone()));
            }
            if !seen.insert(label.as_str()) {
                return Err(VocabError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Number of gloss labels, excluding the blank class.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Total class count: all labels plus the blank class.
    pub fn class_count(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Text form of a class index. Class 0 renders as [`BLANK_TOKEN`].
    ///
    /// # Panics
    /// Panics if `class >= class_count()`.
    pub fn label(&self, class: usize) -> &str {
        if class == BLANK {
            BLANK_TOKEN
        } else {
            &self.labels[class - 1]
        }
    }

    /// Class index of a label, if present. The blank token maps to class 0.
    pub fn class_of(&self, label: &str) -> Option<usize> {
        if label == BLANK_TOKEN {
            return Some(BLANK);
        }
        self.labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// Iterator over all non-blank class indices, in label order.
    pub fn gloss_classes(&self) -> impl Iterator<Item = usize> {
        1..=self.labels.len()
    }

    pub fn contains_class(&self, class: usize) -> bool {
        class < self.class_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn class_indices_offset_by_blank() {
        let v = GlossVocab::new(labels(&["A", "B"])).unwrap();
        assert_eq!(v.class_count(), 3);
        assert_eq!(v.class_of("A"), Some(1));
        assert_eq!(v.class_of("B"), Some(2));
        assert_eq!(v.label(0), BLANK_TOKEN);
        assert_eq!(v.label(2), "B");
        assert_eq!(v.gloss_classes().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert_eq!(GlossVocab::new(vec![]).unwrap_err(), VocabError::Empty);
        assert_eq!(
            GlossVocab::new(labels(&["A", "A"])).unwrap_err(),
            VocabError::DuplicateLabel("A".into())
        );
        assert_eq!(
            GlossVocab::new(labels(&[BLANK_TOKEN])).unwrap_err(),
            VocabError::ReservedLabel(BLANK_TOKEN.into())
        );
    }

    #[test]
    fn serde_round_trip_validates() {
        let v = GlossVocab::new(labels(&["X", "Y"])).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"labels":["X","Y"]}"#);
        let back: GlossVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let bad: Result<GlossVocab, _> = serde_json::from_str(r#"{"labels":["X","X"]}"#);
        assert!(bad.is_err());
    }
}
