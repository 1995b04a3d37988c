//! Accuracy, confusion matrices, training subsets and learning curves.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus_io::Label;
use crate::taggers::{LabeledSentence, Tagger};
use crate::{Error, Result};

/// Training fractions used for learning curves.
pub const CURVE_FRACTIONS: [f64; 5] = [0.01, 0.05, 0.10, 0.50, 1.00];

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub label_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: u8) -> Self {
        let k = n_classes as usize;
        Self {
            counts: vec![vec![0; k]; k],
            label_names: (0..k).map(|i| i.to_string()).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }

    /// Correct predictions of class `c` over all predictions of `c`.
    pub fn precision(&self, c: usize) -> Option<f64> {
        let col: u64 = self.counts.iter().map(|r| r[c]).sum();
        (col > 0).then(|| self.counts[c][c] as f64 / col as f64)
    }

    /// Correct predictions of class `c` over all gold `c`.
    pub fn recall(&self, c: usize) -> Option<f64> {
        let row: u64 = self.counts[c].iter().sum();
        (row > 0).then(|| self.counts[c][c] as f64 / row as f64)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for n in &self.label_names {
            write!(out, "\t{n}").unwrap();
        }
        out.push('\n');
        for (n, row) in self.label_names.iter().zip(&self.counts) {
            out.push_str(n);
            for c in row {
                write!(out, "\t{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn check_alignment(pred: &[Label], gold: &[Label]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if let Some(i) = pred.iter().zip(gold).position(|(p, g)| p.is_some() != g.is_some()) {
        return Err(Error::invalid(format!("NA disagreement at position {i}")));
    }
    Ok(())
}

/// Matches over scored positions. NA positions must coincide.
pub fn accuracy(pred: &[Label], gold: &[Label]) -> Result<f64> {
    check_alignment(pred, gold)?;
    let (mut hits, mut n) = (0u64, 0u64);
    for (p, g) in pred.iter().zip(gold) {
        if let (Some(p), Some(g)) = (p, g) {
            n += 1;
            hits += u64::from(p == g);
        }
    }
    if n == 0 {
        return Err(Error::invalid("no scored positions"));
    }
    Ok(hits as f64 / n as f64)
}

pub fn confusion(pred: &[Label], gold: &[Label], n_classes: u8) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(n_classes);
    add_to_confusion(&mut m, pred, gold)?;
    Ok(m)
}

fn add_to_confusion(m: &mut ConfusionMatrix, pred: &[Label], gold: &[Label]) -> Result<()> {
    check_alignment(pred, gold)?;
    let k = m.counts.len();
    for (p, g) in pred.iter().zip(gold) {
        if let (Some(p), Some(g)) = (*p, *g) {
            if p as usize >= k || g as usize >= k {
                return Err(Error::invalid(format!("label outside {k} classes")));
            }
            m.counts[g as usize][p as usize] += 1;
        }
    }
    Ok(())
}

/// Runs `tagger` over every sentence and tallies against the gold labels.
pub fn evaluate_tagger(tagger: &dyn Tagger, test: &[LabeledSentence]) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(tagger.n_classes());
    for s in test {
        add_to_confusion(&mut m, &tagger.predict(&s.tokens), &s.labels)?;
    }
    if m.total() == 0 {
        return Err(Error::invalid("test corpus has no scored positions"));
    }
    Ok(m)
}

/// Whole sentences drawn in a seeded random order until their scored token
/// count first reaches `fraction` of the corpus total. The subset keeps the
/// corpus order. `fraction == 1` returns the corpus unchanged.
pub fn subset_training(corpus: &[LabeledSentence], fraction: f64, seed: u64) -> Result<Vec<LabeledSentence>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must be in (0, 1], got {fraction}")));
    }
    if fraction == 1.0 {
        return Ok(corpus.to_vec());
    }
    let total: usize = corpus.iter().map(LabeledSentence::scored).sum();
    let target = fraction * total as f64;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = vec![false; corpus.len()];
    let mut count = 0usize;
    for i in order {
        if count as f64 >= target {
            break;
        }
        taken[i] = true;
        count += corpus[i].scored();
    }
    Ok(corpus
        .iter()
        .zip(taken)
        .filter_map(|(s, t)| t.then(|| s.clone()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub accuracy: f64,
}

/// Parses comma-separated percentages such as `1,5,10,50,100`. Every value
/// must correspond to one of [`CURVE_FRACTIONS`]. The result is sorted and
/// deduplicated.
pub fn parse_fractions(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for f in spec.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        let v: f64 = f
            .parse()
            .map_err(|_| Error::invalid(format!("bad fraction {f:?}")))?;
        let v = v / 100.0;
        let known = CURVE_FRACTIONS
            .iter()
            .copied()
            .find(|c| (c - v).abs() < 1e-9)
            .ok_or_else(|| Error::invalid(format!("fraction {f} not in 1,5,10,50,100 percent")))?;
        out.push(known);
    }
    if out.is_empty() {
        return Err(Error::invalid("no fractions given"));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Trains from scratch on each subset and scores on `test`. Points come
/// back in ascending fraction order.
pub fn learning_curve<T, F>(
    mut trainer: F,
    train: &[LabeledSentence],
    test: &[LabeledSentence],
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<CurvePoint>>
where
    T: Tagger,
    F: FnMut(&[LabeledSentence]) -> Result<T>,
{
    let mut fractions = fractions.to_vec();
    fractions.sort_by(f64::total_cmp);
    fractions
        .into_iter()
        .map(|fraction| {
            let subset = subset_training(train, fraction, seed)?;
            log::info!(
                "fraction {fraction}: {} sentences, {} scored tokens",
                subset.len(),
                subset.iter().map(LabeledSentence::scored).sum::<usize>()
            );
            let model = trainer(&subset)?;
            let accuracy = evaluate_tagger(&model, test)?.accuracy();
            Ok(CurvePoint { fraction, accuracy })
        })
        .collect()
}

/// One line of a report: which model, which task, which training fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub n_classes: u8,
    pub fraction: f64,
    pub accuracy: f64,
}

fn task_name(n_classes: u8) -> String {
    format!("{n_classes}-way")
}

/// `model<TAB>task<TAB>fraction<TAB>accuracy` with a header line.
pub fn report_tsv(rows: &[ReportRow]) -> String {
    let mut out = String::from("model\ttask\tfraction\taccuracy\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.4}",
            r.model,
            task_name(r.n_classes),
            r.fraction,
            r.accuracy
        )
        .unwrap();
    }
    out
}

/// Plain-text table with one row per model and a percentage column per task.
pub fn summary_table(rows: &[ReportRow]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut tasks: Vec<u8> = Vec::new();
    for r in rows {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if !tasks.contains(&r.n_classes) {
            tasks.push(r.n_classes);
        }
    }
    tasks.sort_unstable();
    let width = models.iter().map(|m| m.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}", "Model");
    for t in &tasks {
        write!(out, "  {:>6}", task_name(*t)).unwrap();
    }
    out.push('\n');
    for m in models {
        write!(out, "{m:<width$}").unwrap();
        for t in &tasks {
            let cell = rows
                .iter()
                .rev()
                .find(|r| r.model == m && r.n_classes == *t)
                .map_or_else(|| "-".to_string(), |r| format!("{:.1}", 100.0 * r.accuracy));
            write!(out, "  {cell:>6}").unwrap();
        }
        out.push('\n');
    }
    out
}
