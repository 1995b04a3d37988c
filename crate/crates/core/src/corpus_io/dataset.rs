use std::fmt::Write as _;

use super::{normalize_newlines, Label, Utterance};
use crate::{Error, Result};

/// One dataset row: a token with its discrete and continuous prominence.
/// Both values are `None` (NA) for punctuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProminenceRecord {
    pub token: String,
    pub discrete: Label,
    pub continuous: Option<f64>,
}

impl ProminenceRecord {
    pub fn word(token: impl Into<String>, discrete: u8, continuous: f64) -> Self {
        Self {
            token: token.into(),
            discrete: Some(discrete),
            continuous: Some(continuous),
        }
    }

    pub fn na(token: impl Into<String>) -> Self {
        Self {
            token: token.into(),
            discrete: None,
            continuous: None,
        }
    }
}

/// Serializes annotated utterances as `token\tdiscrete\tcontinuous` lines,
/// one blank line between utterances.
pub fn write_dataset(utterances: &[(Utterance, Vec<ProminenceRecord>)]) -> Result<String> {
    let mut out = String::new();
    for (i, (utt, records)) in utterances.iter().enumerate() {
        if records.len() != utt.tokens.len() {
            return Err(Error::invalid(format!(
                "utterance {}: {} records for {} tokens",
                utt.id,
                records.len(),
                utt.tokens.len()
            )));
        }
        if i > 0 {
            out.push('\n');
        }
        write_records(&mut out, records);
    }
    Ok(out)
}

pub(crate) fn write_records(out: &mut String, records: &[ProminenceRecord]) {
    for r in records {
        out.push_str(&r.token);
        out.push('\t');
        match r.discrete {
            Some(d) => write!(out, "{d}").unwrap(),
            None => out.push_str("NA"),
        }
        out.push('\t');
        match r.continuous {
            Some(c) => write!(out, "{c:.3}").unwrap(),
            None => out.push_str("NA"),
        }
        out.push('\n');
    }
}

/// Parses the dataset format written by [`write_dataset`] into sentences.
///
/// Runs of blank lines separate sentences.
pub fn parse_dataset(text: &str) -> Result<Vec<Vec<ProminenceRecord>>> {
    let text = normalize_newlines(text);
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        current.push(parse_row(raw, line)?);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

fn parse_row(raw: &str, line: usize) -> Result<ProminenceRecord> {
    let cols: Vec<&str> = raw.split('\t').collect();
    let [token, discrete, continuous] = cols[..] else {
        return Err(Error::parse(
            line,
            format!("expected 3 tab-separated columns, found {}", cols.len()),
        ));
    };
    let discrete = match discrete.trim() {
        "NA" => None,
        d => match d.parse::<u8>() {
            Ok(v @ 0..=2) => Some(v),
            _ => return Err(Error::parse(line, format!("label out of range: {d:?}"))),
        },
    };
    let continuous = match continuous.trim() {
        "NA" => None,
        c => {
            let v: f64 = c
                .parse()
                .map_err(|_| Error::parse(line, format!("non-numeric continuous value {c:?}")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::parse(line, format!("negative continuous value {c}")));
            }
            Some(v)
        }
    };
    if discrete.is_none() != continuous.is_none() {
        return Err(Error::parse(
            line,
            "discrete and continuous must both be NA or both be present",
        ));
    }
    Ok(ProminenceRecord {
        token: token.to_string(),
        discrete,
        continuous,
    })
}
