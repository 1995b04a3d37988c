//! Text-only prominence predictors: majority baselines, a uniform random
//! baseline, a linear-chain CRF, and a windowed word-embedding classifier.
//!
//! Every predictor emits NA exactly at punctuation tokens.

mod crf;
mod embed;
mod features;
pub mod lbfgs;
mod majority;
mod model_file;

pub use crf::{
    crf_loglik_grad, crf_score, crf_train, forward_logz, viterbi, CrfHyper, CrfModel, CrfTraining,
};
pub use embed::{predict_embed, train_embed_classifier, EmbedHyper, EmbeddingClassifier};
pub use features::crf_featurize;
pub use majority::{predict_majority, train_majority, MajorityMode, MajorityModel, RandomModel};
pub use model_file::{load_model, save_model, Model};

use crate::corpus_io::{is_punctuation, Label, ProminenceRecord};
use crate::{Error, Result};

/// Tokens with aligned gold labels. NA positions give context but are never
/// scored.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub labels: Vec<Label>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<String>, labels: Vec<Label>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(Self { tokens, labels })
    }

    /// Builds a sentence from dataset rows. With `n_classes == 2` the
    /// prominent classes 1 and 2 merge into 1.
    pub fn from_records(records: &[ProminenceRecord], n_classes: u8) -> Result<Self> {
        check_classes(n_classes)?;
        let tokens = records.iter().map(|r| r.token.clone()).collect();
        let labels = records
            .iter()
            .map(|r| r.discrete.map(|d| if n_classes == 2 { d.min(1) } else { d }))
            .collect();
        Self::new(tokens, labels)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of scored (non-NA) positions.
    pub fn scored(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Converts parsed dataset sentences into labeled sentences.
pub fn corpus_from_dataset(sentences: &[Vec<ProminenceRecord>], n_classes: u8) -> Result<Vec<LabeledSentence>> {
    sentences
        .iter()
        .map(|s| LabeledSentence::from_records(s, n_classes))
        .collect()
}

pub(crate) fn check_classes(n_classes: u8) -> Result<()> {
    if n_classes == 2 || n_classes == 3 {
        Ok(())
    } else {
        Err(Error::invalid(format!("class count must be 2 or 3, got {n_classes}")))
    }
}

/// A trained predictor.
pub trait Tagger: Send + Sync {
    fn n_classes(&self) -> u8;

    fn predict(&self, tokens: &[String]) -> Vec<Label>;
}

/// Sets NA at punctuation; leaves other positions to `f`.
pub(crate) fn label_words(tokens: &[String], mut f: impl FnMut(usize) -> u8) -> Vec<Label> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (!is_punctuation(t)).then(|| f(i)))
        .collect()
}

/// Index of the largest value, ties to the smallest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
