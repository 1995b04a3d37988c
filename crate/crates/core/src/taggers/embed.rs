//! Multinomial logistic regression over the embeddings of the previous,
//! current and next word.

use std::collections::HashMap;

use log::info;

use super::lbfgs::{minimize, LbfgsConfig};
use super::{argmax, check_classes, label_words, LabeledSentence, Tagger};
use crate::corpus_io::{EmbeddingTable, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedHyper {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for EmbedHyper {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            max_iterations: 200,
            tolerance: 1e-7,
        }
    }
}

/// Row `k` of `weights` scores class `k` against
/// `[prev (D), current (D), next (D), 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingClassifier {
    pub n_classes: u8,
    pub table: EmbeddingTable,
    pub weights: Vec<Vec<f64>>,
    pub hyper: EmbedHyper,
}

impl EmbeddingClassifier {
    pub fn input_width(&self) -> usize {
        3 * self.table.dimension() + 1
    }

    fn logits(&self, tokens: &[String], i: usize, out: &mut [f64]) {
        let d = self.table.dimension();
        let window = context(&self.table, tokens, i);
        for (row, o) in self.weights.iter().zip(out.iter_mut()) {
            let mut z = row[3 * d];
            for (part, v) in window.iter().enumerate() {
                z += dot(&row[part * d..(part + 1) * d], v);
            }
            *o = z;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Embeddings of positions `i-1`, `i`, `i+1`; zero vectors past the edges.
fn context<'a>(table: &'a EmbeddingTable, tokens: &[String], i: usize) -> [&'a [f64]; 3] {
    let get = |j: Option<usize>| match j.and_then(|j| tokens.get(j)) {
        Some(t) => table.lookup(t),
        None => table.unknown_vector(),
    };
    [get(i.checked_sub(1)), get(Some(i)), get(Some(i + 1))]
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Distinct context vectors by id; id 0 is the zero vector.
struct Compiled {
    vectors: Vec<Vec<f64>>,
    /// (prev, current, next, gold label) per scored position.
    rows: Vec<([usize; 3], usize)>,
}

fn compile(table: &EmbeddingTable, corpus: &[LabeledSentence], k: usize) -> Result<Compiled> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut vectors = vec![vec![0.0; table.dimension()]];
    let mut id_of = |tok: Option<&String>| -> usize {
        let Some(tok) = tok else { return 0 };
        if let Some(&id) = ids.get(tok) {
            return id;
        }
        let id = vectors.len();
        vectors.push(table.lookup(tok).to_vec());
        ids.insert(tok.clone(), id);
        id
    };
    let mut rows = Vec::new();
    for s in corpus {
        for (i, l) in s.labels.iter().enumerate() {
            let Some(y) = *l else { continue };
            if y as usize >= k {
                return Err(Error::invalid(format!("label {y} outside {k} classes")));
            }
            let prev = id_of(i.checked_sub(1).and_then(|j| s.tokens.get(j)));
            let cur = id_of(s.tokens.get(i));
            let next = id_of(s.tokens.get(i + 1));
            rows.push(([prev, cur, next], y as usize));
        }
    }
    Ok(Compiled { vectors, rows })
}

/// Trains the window classifier by full-batch L-BFGS on the L2-regularized
/// cross-entropy. The bias column is not regularized. Also returns the
/// objective after each iteration.
pub fn train_embed_classifier(
    corpus: &[LabeledSentence],
    table: &EmbeddingTable,
    n_classes: u8,
    hyper: EmbedHyper,
) -> Result<(EmbeddingClassifier, Vec<f64>)> {
    check_classes(n_classes)?;
    if corpus.is_empty() {
        return Err(Error::invalid("empty training corpus"));
    }
    let k = n_classes as usize;
    let d = table.dimension();
    let width = 3 * d + 1;
    let data = compile(table, corpus, k)?;
    if data.rows.is_empty() {
        return Err(Error::invalid("training corpus has no labeled tokens"));
    }
    info!(
        "training embedding classifier: {} positions, {} inputs",
        data.rows.len(),
        width
    );
    let lambda = hyper.l2_lambda;
    let objective = |w: &[f64], g: &mut [f64]| -> f64 {
        g.fill(0.0);
        let mut loss = 0.0;
        let mut z = vec![0.0; k];
        for (ctx, y) in &data.rows {
            for (c, zc) in z.iter_mut().enumerate() {
                let row = &w[c * width..(c + 1) * width];
                *zc = row[3 * d]
                    + ctx
                        .iter()
                        .enumerate()
                        .map(|(p, &id)| dot(&row[p * d..(p + 1) * d], &data.vectors[id]))
                        .sum::<f64>();
            }
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - z[*y];
            for (c, zc) in z.iter().enumerate() {
                let coef = (zc - lse).exp() - if c == *y { 1.0 } else { 0.0 };
                let grow = &mut g[c * width..(c + 1) * width];
                for (p, &id) in ctx.iter().enumerate() {
                    for (gi, xi) in grow[p * d..(p + 1) * d].iter_mut().zip(&data.vectors[id]) {
                        *gi += coef * xi;
                    }
                }
                grow[3 * d] += coef;
            }
        }
        for c in 0..k {
            for j in 0..3 * d {
                let wi = w[c * width + j];
                loss += lambda * wi * wi;
                g[c * width + j] += 2.0 * lambda * wi;
            }
        }
        loss
    };
    let cfg = LbfgsConfig {
        max_iterations: hyper.max_iterations,
        tolerance: hyper.tolerance,
        ..Default::default()
    };
    let report = minimize(vec![0.0; k * width], objective, &cfg)?;
    info!(
        "embedding classifier: {} iterations, loss {:.4}",
        report.iterations, report.value
    );
    let weights = report.x.chunks(width).map(<[f64]>::to_vec).collect();
    let classifier = EmbeddingClassifier {
        n_classes,
        table: table.clone(),
        weights,
        hyper,
    };
    Ok((classifier, report.history))
}

/// Per-position argmax of the logits; punctuation is NA.
pub fn predict_embed(classifier: &EmbeddingClassifier, tokens: &[String]) -> Vec<Label> {
    let mut z = vec![0.0; classifier.n_classes as usize];
    label_words(tokens, |i| {
        classifier.logits(tokens, i, &mut z);
        softmax_in_place(&mut z);
        argmax(&z) as u8
    })
}

impl Tagger for EmbeddingClassifier {
    fn n_classes(&self) -> u8 {
        self.n_classes
    }

    fn predict(&self, tokens: &[String]) -> Vec<Label> {
        predict_embed(self, tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::load_embeddings;

    fn sent(words: &[&str], labels: &[Label]) -> LabeledSentence {
        LabeledSentence::new(words.iter().map(|w| w.to_string()).collect(), labels.to_vec()).unwrap()
    }

    fn toy() -> (EmbeddingTable, Vec<LabeledSentence>) {
        let table = load_embeddings("big 1 0\nsmall -1 0\nred 0 1\nblue 0 -1\n, 0 0\n", 2).unwrap();
        let corpus = vec![
            sent(&["big", "red", ",", "small"], &[Some(1), Some(0), None, Some(0)]),
            sent(&["small", "blue", "big"], &[Some(0), Some(0), Some(1)]),
            sent(&["big", "big", "blue"], &[Some(1), Some(1), Some(0)]),
        ];
        (table, corpus)
    }

    #[test]
    fn separable_fixture() {
        let (table, corpus) = toy();
        let c = train_embed_classifier(&corpus, &table, 2, EmbedHyper::default()).unwrap().0;
        assert_eq!(c.weights.len(), 2);
        assert_eq!(c.weights[0].len(), c.input_width());
        for s in &corpus {
            assert_eq!(predict_embed(&c, &s.tokens), s.labels);
        }
    }

    #[test]
    fn zero_embeddings_predict_majority() {
        let table = load_embeddings("a 0 0\nb 0 0\n", 2).unwrap();
        let corpus = vec![
            sent(&["a", "b", "a"], &[Some(2), Some(2), Some(0)]),
            sent(&["b", "c"], &[Some(1), Some(2)]),
        ];
        let c = train_embed_classifier(&corpus, &table, 3, EmbedHyper::default()).unwrap().0;
        let p = predict_embed(&c, &corpus[0].tokens);
        assert_eq!(p, [Some(2); 3]);
    }

    #[test]
    fn shift_invariant_predictions() {
        let (table, corpus) = toy();
        let mut shifted = table.clone();
        shifted.map_vectors(|v| {
            v[0] += 3.0;
            v[1] -= 2.0;
        });
        let a = train_embed_classifier(&corpus, &table, 2, EmbedHyper::default()).unwrap().0;
        let b = train_embed_classifier(&corpus, &shifted, 2, EmbedHyper::default()).unwrap().0;
        for s in &corpus {
            assert_eq!(predict_embed(&a, &s.tokens), predict_embed(&b, &s.tokens));
        }
    }

    #[test]
    fn empty_corpus() {
        let (table, _) = toy();
        assert!(train_embed_classifier(&[], &table, 2, EmbedHyper::default()).is_err());
    }
}
