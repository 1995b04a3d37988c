use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, check_classes, label_words, LabeledSentence, Tagger};
use crate::corpus_io::Label;
use crate::{Error, Result};

/// Label counts per lowercased word type, plus corpus-wide counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityModel {
    pub n_classes: u8,
    pub per_word: BTreeMap<String, Vec<u64>>,
    pub global: Vec<u64>,
    pub mode: MajorityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorityMode {
    /// Each word's most frequent label; unseen words get the global majority.
    PerWord,
    /// The global majority everywhere.
    Global,
}

impl std::str::FromStr for MajorityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-word" | "per_word" => Ok(Self::PerWord),
            "global" => Ok(Self::Global),
            other => Err(Error::invalid(format!("unknown majority mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for MajorityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerWord => "per-word",
            Self::Global => "global",
        })
    }
}

pub fn train_majority(corpus: &[LabeledSentence], n_classes: u8) -> Result<MajorityModel> {
    check_classes(n_classes)?;
    let k = n_classes as usize;
    let mut per_word: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut global = vec![0u64; k];
    for s in corpus {
        for (tok, label) in s.tokens.iter().zip(&s.labels) {
            let Some(l) = *label else { continue };
            if l as usize >= k {
                return Err(Error::invalid(format!("label {l} outside {n_classes} classes")));
            }
            per_word
                .entry(tok.to_lowercase())
                .or_insert_with(|| vec![0; k])[l as usize] += 1;
            global[l as usize] += 1;
        }
    }
    if global.iter().all(|&c| c == 0) {
        return Err(Error::invalid("training corpus has no labeled tokens"));
    }
    Ok(MajorityModel {
        n_classes,
        per_word,
        global,
        mode: MajorityMode::PerWord,
    })
}

pub fn predict_majority(m: &MajorityModel, tokens: &[String], mode: MajorityMode) -> Vec<Label> {
    let fallback = argmax(&m.global) as u8;
    label_words(tokens, |i| match mode {
        MajorityMode::Global => fallback,
        MajorityMode::PerWord => m
            .per_word
            .get(&tokens[i].to_lowercase())
            .map_or(fallback, |c| argmax(c) as u8),
    })
}

impl MajorityModel {
    pub fn with_mode(mut self, mode: MajorityMode) -> Self {
        self.mode = mode;
        self
    }
}

impl Tagger for MajorityModel {
    fn n_classes(&self) -> u8 {
        self.n_classes
    }

    fn predict(&self, tokens: &[String]) -> Vec<Label> {
        predict_majority(self, tokens, self.mode)
    }
}

/// Uniform random labels. Each sentence draws from a generator seeded by the
/// model seed and the sentence text, so output does not depend on call order.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModel {
    pub n_classes: u8,
    pub seed: u64,
}

impl Tagger for RandomModel {
    fn n_classes(&self) -> u8 {
        self.n_classes
    }

    fn predict(&self, tokens: &[String]) -> Vec<Label> {
        let mut h = DefaultHasher::new();
        tokens.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h.finish());
        label_words(tokens, |_| rng.random_range(0..self.n_classes))
    }
}
