//! Readers and writers for every external format the toolkit touches:
//! PCM WAV audio, word alignments (`.lab` and long-form TextGrid), the
//! prominence dataset TSV, and word-embedding text files.
//!
//! All text inputs are UTF-8; CRLF line endings are normalized to LF before
//! parsing.

mod alignment;
mod dataset;
mod embeddings;
mod wav;

use std::sync::LazyLock;

use regex::Regex;

pub use alignment::{parse_lab, parse_textgrid};
pub use dataset::{parse_dataset, write_dataset, ProminenceRecord};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use wav::read_wav;

/// Discrete prominence label. `None` is the NA label carried by punctuation.
pub type Label = Option<u8>;

/// Mono audio with samples scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One aligned token.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub is_punct: bool,
}

impl Token {
    pub fn new(text: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        let text = text.into();
        let is_punct = is_punctuation(&text);
        Self {
            text,
            start_s,
            end_s,
            is_punct,
        }
    }
}

/// An aligned sentence: the unit of annotation work.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub tokens: Vec<Token>,
}

impl Utterance {
    /// Builds an utterance, checking that it holds at least one word.
    pub fn new(
        id: impl Into<String>,
        speaker: impl Into<String>,
        tokens: Vec<Token>,
    ) -> crate::Result<Self> {
        let id = id.into();
        if !tokens.iter().any(|t| !t.is_punct) {
            return Err(crate::Error::invalid(format!(
                "utterance {id} has no word tokens"
            )));
        }
        Ok(Self {
            id,
            speaker: speaker.into(),
            tokens,
        })
    }

    /// End time of the last token.
    pub fn end_s(&self) -> f64 {
        self.tokens.iter().map(|t| t.end_s).fold(0.0, f64::max)
    }
}

/// Speaker id from a LibriTTS-style utterance id (`84_121123_000007_000001` → `84`).
pub fn speaker_from_id(id: &str) -> &str {
    id.split('_').next().unwrap_or(id)
}

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{P}+$").unwrap());

/// True iff every character of `text` is Unicode punctuation.
pub fn is_punctuation(text: &str) -> bool {
    PUNCT.is_match(text)
}

pub(crate) fn normalize_newlines(text: &str) -> std::borrow::Cow<'_, str> {
    if text.contains('\r') {
        std::borrow::Cow::Owned(text.replace("\r\n", "\n").replace('\r', "\n"))
    } else {
        std::borrow::Cow::Borrowed(text)
    }
}
