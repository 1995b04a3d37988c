//! Continuous prominence → discrete classes, and threshold calibration
//! against a binary reference annotation.

use log::warn;

use crate::corpus_io::Label;
use crate::{Error, Result};

/// Cut-offs between classes. Values at a threshold map to the upper class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub theta1: f64,
    pub theta2: Option<f64>,
}

impl Thresholds {
    pub fn new(theta1: f64, theta2: Option<f64>) -> Result<Self> {
        if !(theta1 >= 0.0) || !theta1.is_finite() {
            return Err(Error::invalid(format!("theta1 must be non-negative, got {theta1}")));
        }
        if let Some(t2) = theta2 {
            if !(t2 > theta1) || !t2.is_finite() {
                return Err(Error::invalid(format!(
                    "theta2 ({t2}) must exceed theta1 ({theta1})"
                )));
            }
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn binary(theta1: f64) -> Result<Self> {
        Self::new(theta1, None)
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta1: 0.5,
            theta2: Some(1.0),
        }
    }
}

/// Labels one value; `None` stays NA.
pub fn discretize_value(v: Option<f64>, t: &Thresholds, n_classes: u8) -> Result<Label> {
    let Some(v) = v else { return Ok(None) };
    match n_classes {
        2 => Ok(Some(u8::from(v >= t.theta1))),
        3 => {
            let t2 = t
                .theta2
                .ok_or_else(|| Error::invalid("3-way discretization needs theta2"))?;
            Ok(Some(if v < t.theta1 {
                0
            } else if v < t2 {
                1
            } else {
                2
            }))
        }
        n => Err(Error::invalid(format!("unsupported class count {n}"))),
    }
}

pub fn discretize(values: &[Option<f64>], t: &Thresholds, n_classes: u8) -> Result<Vec<Label>> {
    values
        .iter()
        .map(|&v| discretize_value(v, t, n_classes))
        .collect()
}

/// Outcome of [`calibrate_binary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub thresholds: Thresholds,
    pub agreement: f64,
}

/// Picks θ1 among midpoints of consecutive distinct values to maximize
/// agreement with a binary reference; ties go to the smaller θ1.
pub fn calibrate_binary(values: &[f64], reference: &[u8]) -> Result<Calibration> {
    if values.len() != reference.len() {
        return Err(Error::invalid(format!(
            "{} values but {} reference labels",
            values.len(),
            reference.len()
        )));
    }
    if let Some(bad) = reference.iter().find(|&&r| r > 1) {
        return Err(Error::invalid(format!("reference label {bad} is not binary")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite calibration value"));
    }
    let positives = reference.iter().filter(|&&r| r == 1).count();
    if positives == 0 || positives == reference.len() {
        return Err(Error::invalid("degenerate reference: only one class present"));
    }
    let mut pairs: Vec<(f64, u8)> = values.iter().copied().zip(reference.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sweep upward: with θ just above pairs[..=i], everything up to i is
    // predicted 0. agreement = negatives below + positives above.
    let n = pairs.len();
    let mut neg_below = 0usize;
    let mut pos_below = 0usize;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n - 1 {
        if pairs[i].1 == 0 {
            neg_below += 1;
        } else {
            pos_below += 1;
        }
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let correct = neg_below + (positives - pos_below);
        let theta = 0.5 * (pairs[i].0 + pairs[i + 1].0);
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((theta, correct));
        }
    }
    let (theta1, correct) =
        best.ok_or_else(|| Error::invalid("calibration values are all identical"))?;
    Ok(Calibration {
        thresholds: Thresholds::binary(theta1.max(0.0))?,
        agreement: correct as f64 / n as f64,
    })
}

/// Outcome of [`split_prominent`]. `degenerate` flags a median that sits on
/// the smallest prominent value, leaving class 1 empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub theta2: f64,
    pub degenerate: bool,
}

/// Median of the values at or above θ1: splits the prominent class into two
/// halves of roughly equal size.
pub fn split_prominent(values: &[f64], theta1: f64) -> Result<Split> {
    let mut prominent: Vec<f64> = values.iter().copied().filter(|&v| v >= theta1).collect();
    if prominent.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 prominent values to split, found {}",
            prominent.len()
        )));
    }
    prominent.sort_by(f64::total_cmp);
    let m = prominent.len();
    let theta2 = if m % 2 == 1 {
        prominent[m / 2]
    } else {
        0.5 * (prominent[m / 2 - 1] + prominent[m / 2])
    };
    let degenerate = theta2 <= prominent[0];
    if degenerate {
        warn!("prominent split is degenerate: theta2 = {theta2} leaves class 1 empty");
    }
    Ok(Split { theta2, degenerate })
}
