//! Wait-k scheduling for simultaneous gloss-to-text emission.
//!
//! Target token `j` (1-based) may be produced only after
//! `min(j + k - 1, source length)` source glosses have been read. Once the
//! source is exhausted the remaining tokens flush without further reads.

use crate::vocab::GlossVocab;

/// Default read-ahead of the wait-k policy.
pub const DEFAULT_WAITK: usize = 2;

/// What should actually turn glosses into target tokens is pluggable; the
/// toolkit ships only an identity stub.
pub trait Translator {
    /// Produces target token `target_index` (1-based) from the glosses read
    /// so far, or `None` when the translation is complete.
    fn next_token(&mut self, read: &[usize], target_index: usize) -> Option<String>;
}

/// Emits one token per source gloss: the label of the `j`-th gloss read.
pub struct IdentityTranslator<'a> {
    vocab: &'a GlossVocab,
}

impl<'a> IdentityTranslator<'a> {
    pub fn new(vocab: &'a GlossVocab) -> Self {
        Self { vocab }
    }
}

impl Translator for IdentityTranslator<'_> {
    fn next_token(&mut self, read: &[usize], target_index: usize) -> Option<String> {
        if target_index > read.len() {
            return None;
        }
        Some(self.vocab.label(read[target_index - 1]).to_string())
    }
}

/// One step of the interleaved schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WaitkAction {
    Read { gloss: usize },
    Emit { token: String },
}

/// Full schedule of a wait-k run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaitkRun {
    pub actions: Vec<WaitkAction>,
    pub tokens: Vec<String>,
}

impl WaitkRun {
    /// Number of reads that happened before emission `j` (1-based).
    pub fn reads_before_emission(&self, j: usize) -> usize {
        let mut reads = 0;
        let mut emitted = 0;
        for action in &self.actions {
            match action {
                WaitkAction::Read { .. } => reads += 1,
                WaitkAction::Emit { .. } => {
                    emitted += 1;
                    if emitted == j {
                        return reads;
                    }
                }
            }
        }
        reads
    }
}

/// Runs the wait-k policy over a source gloss stream with a pluggable
/// translator. With `k >= source.len()` the schedule degenerates to fully
/// offline: every read precedes every emission.
///
/// # Panics
/// Panics if `k` is zero.
pub fn waitk_schedule(k: usize, source: &[usize], translator: &mut dyn Translator) -> WaitkRun {
    assert!(k >= 1, "wait-k requires k >= 1");
    let mut actions = Vec::new();
    let mut tokens = Vec::new();
    let mut reads = 0usize;
    let mut j = 1usize;
    loop {
        let needed = (j + k - 1).min(source.len());
        while reads < needed {
            actions.push(WaitkAction::Read {
                gloss: source[reads],
            });
            reads += 1;
        }
        match translator.next_token(&source[..reads], j) {
            Some(token) => {
                actions.push(WaitkAction::Emit {
                    token: token.clone(),
                });
                tokens.push(token);
                j += 1;
            }
            None => break,
        }
    }
    WaitkRun { actions, tokens }
}
