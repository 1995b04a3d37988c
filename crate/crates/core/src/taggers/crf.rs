//! Linear-chain CRF over prominence classes plus a frozen NA state.
//!
//! States are the `K` classes and one NA state (index `K`). NA positions
//! (punctuation) are pinned to the NA state, whose emission score is always
//! 0; transitions into and out of it are learned. Word positions range over
//! the `K` classes only.
//!
//! Weight layout: `features.len() * K` emission weights (feature-major),
//! then `(K + 1)²` transition weights (`from * (K + 1) + to`).

use std::collections::HashMap;

use log::info;

use super::features::crf_featurize;
use super::lbfgs::{minimize, LbfgsConfig};
use super::{check_classes, LabeledSentence, Tagger};
use crate::corpus_io::{is_punctuation, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    pub n_classes: u8,
    pub features: Vec<String>,
    pub feature_index: HashMap<String, u32>,
    pub weights: Vec<f64>,
    pub hyper: CrfHyper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfHyper {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CrfHyper {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            max_iterations: 100,
            tolerance: 1e-5,
        }
    }
}

impl CrfModel {
    /// A zero-weight model over the given feature strings.
    pub fn new(n_classes: u8, features: Vec<String>, hyper: CrfHyper) -> Result<Self> {
        check_classes(n_classes)?;
        let feature_index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect::<HashMap<_, _>>();
        if feature_index.len() != features.len() {
            return Err(Error::invalid("duplicate feature strings"));
        }
        let k = n_classes as usize;
        let weights = vec![0.0; features.len() * k + (k + 1) * (k + 1)];
        Ok(Self {
            n_classes,
            features,
            feature_index,
            weights,
            hyper,
        })
    }

    pub fn k(&self) -> usize {
        self.n_classes as usize
    }

    pub fn states(&self) -> usize {
        self.k() + 1
    }

    pub fn emission_index(&self, feature: u32, label: usize) -> usize {
        feature as usize * self.k() + label
    }

    pub fn transition_index(&self, from: usize, to: usize) -> usize {
        self.features.len() * self.k() + from * self.states() + to
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.weights[self.transition_index(from, to)]
    }

    /// Known feature ids for every position.
    fn compile_features(&self, tokens: &[String]) -> Vec<Vec<u32>> {
        (0..tokens.len())
            .map(|i| {
                crf_featurize(tokens, i)
                    .iter()
                    .filter_map(|f| self.feature_index.get(f).copied())
                    .collect()
            })
            .collect()
    }
}

/// A sentence prepared for dynamic programming.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    feats: Vec<Vec<u32>>,
    na: Vec<bool>,
}

impl Lattice {
    fn len(&self) -> usize {
        self.na.len()
    }

    fn allowed(&self, t: usize, k: usize) -> std::ops::Range<usize> {
        if self.na[t] {
            k..k + 1
        } else {
            0..k
        }
    }
}

fn emissions(model: &CrfModel, lat: &Lattice, w: &[f64]) -> Vec<Vec<f64>> {
    let k = model.k();
    (0..lat.len())
        .map(|t| {
            let mut e = vec![0.0; k + 1];
            if !lat.na[t] {
                for &f in &lat.feats[t] {
                    let base = f as usize * k;
                    for (y, ey) in e.iter_mut().take(k).enumerate() {
                        *ey += w[base + y];
                    }
                }
            }
            e
        })
        .collect()
}

fn state_of(label: Label, k: usize) -> usize {
    label.map_or(k, usize::from)
}

/// Unnormalized log score of a labeling: active emission weights plus
/// transitions between consecutive states (NA is its own state).
pub fn crf_score(model: &CrfModel, tokens: &[String], labels: &[Label]) -> f64 {
    let k = model.k();
    let feats = model.compile_features(tokens);
    let mut score = 0.0;
    for (t, label) in labels.iter().enumerate() {
        if let Some(y) = label {
            for &f in &feats[t] {
                score += model.weights[model.emission_index(f, *y as usize)];
            }
        }
        if t > 0 {
            score += model.transition(state_of(labels[t - 1], k), state_of(*label, k));
        }
    }
    score
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct ForwardBackward {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    log_z: f64,
}

fn forward_backward(model: &CrfModel, lat: &Lattice, emit: &[Vec<f64>], w: &[f64]) -> ForwardBackward {
    let k = model.k();
    let s = model.states();
    let n = lat.len();
    let tr = |a: usize, b: usize| w[model.transition_index(a, b)];
    let mut alpha = vec![vec![f64::NEG_INFINITY; s]; n];
    let mut beta = vec![vec![f64::NEG_INFINITY; s]; n];
    if n == 0 {
        return ForwardBackward {
            alpha,
            beta,
            log_z: 0.0,
        };
    }
    for y in lat.allowed(0, k) {
        alpha[0][y] = emit[0][y];
    }
    for t in 1..n {
        for y in lat.allowed(t, k) {
            let prev = lat.allowed(t - 1, k).map(|p| alpha[t - 1][p] + tr(p, y));
            alpha[t][y] = emit[t][y] + log_sum_exp(prev);
        }
    }
    for y in lat.allowed(n - 1, k) {
        beta[n - 1][y] = 0.0;
    }
    for t in (0..n - 1).rev() {
        for y in lat.allowed(t, k) {
            let next = lat
                .allowed(t + 1, k)
                .map(|q| tr(y, q) + emit[t + 1][q] + beta[t + 1][q]);
            beta[t][y] = log_sum_exp(next);
        }
    }
    let log_z = log_sum_exp(lat.allowed(n - 1, k).map(|y| alpha[n - 1][y]));
    ForwardBackward { alpha, beta, log_z }
}

fn decode_lattice(model: &CrfModel, tokens: &[String], labels: Option<&[Label]>) -> Lattice {
    let na = match labels {
        Some(l) => l.iter().map(Option::is_none).collect(),
        None => tokens.iter().map(|t| is_punctuation(t)).collect(),
    };
    Lattice {
        feats: model.compile_features(tokens),
        na,
    }
}

/// Log partition function over all labelings consistent with the NA
/// positions (punctuation).
pub fn forward_logz(model: &CrfModel, tokens: &[String]) -> f64 {
    let lat = decode_lattice(model, tokens, None);
    let emit = emissions(model, &lat, &model.weights);
    forward_backward(model, &lat, &emit, &model.weights).log_z
}

/// Best labeling. Ties go to the smaller label, then the earlier backpointer.
pub fn viterbi(model: &CrfModel, tokens: &[String]) -> Vec<Label> {
    let k = model.k();
    let s = model.states();
    let lat = decode_lattice(model, tokens, None);
    let n = lat.len();
    if n == 0 {
        return Vec::new();
    }
    let emit = emissions(model, &lat, &model.weights);
    let mut delta = vec![vec![f64::NEG_INFINITY; s]; n];
    let mut back = vec![vec![0usize; s]; n];
    for y in lat.allowed(0, k) {
        delta[0][y] = emit[0][y];
    }
    for t in 1..n {
        for y in lat.allowed(t, k) {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for p in lat.allowed(t - 1, k) {
                let v = delta[t - 1][p] + model.transition(p, y);
                if v > best {
                    best = v;
                    arg = p;
                }
            }
            delta[t][y] = best + emit[t][y];
            back[t][y] = arg;
        }
    }
    let mut y = lat.allowed(n - 1, k).next().unwrap();
    for c in lat.allowed(n - 1, k) {
        if delta[n - 1][c] > delta[n - 1][y] {
            y = c;
        }
    }
    let mut states = vec![0; n];
    states[n - 1] = y;
    for t in (1..n).rev() {
        y = back[t][y];
        states[t - 1] = y;
    }
    states
        .into_iter()
        .map(|st| (st < k).then_some(st as u8))
        .collect()
}

/// Compiled training data for the objective.
pub struct CrfTraining {
    lattices: Vec<Lattice>,
    gold: Vec<Vec<usize>>,
}

impl CrfTraining {
    pub fn new(model: &CrfModel, corpus: &[LabeledSentence]) -> Result<Self> {
        let k = model.k();
        let mut lattices = Vec::with_capacity(corpus.len());
        let mut gold = Vec::with_capacity(corpus.len());
        for s in corpus {
            if let Some(bad) = s.labels.iter().flatten().find(|&&l| l as usize >= k) {
                return Err(Error::invalid(format!(
                    "label {bad} outside {} classes",
                    model.n_classes
                )));
            }
            lattices.push(decode_lattice(model, &s.tokens, Some(&s.labels)));
            gold.push(s.labels.iter().map(|&l| state_of(l, k)).collect());
        }
        Ok(Self { lattices, gold })
    }

    /// Regularized conditional log-likelihood at `w` and its gradient.
    pub fn evaluate(&self, model: &CrfModel, w: &[f64], grad: &mut [f64]) -> f64 {
        let k = model.k();
        let lambda = model.hyper.l2_lambda;
        let mut value = 0.0;
        grad.fill(0.0);
        for (lat, gold) in self.lattices.iter().zip(&self.gold) {
            let n = lat.len();
            if n == 0 {
                continue;
            }
            let emit = emissions(model, lat, w);
            let fb = forward_backward(model, lat, &emit, w);
            let mut gold_score = 0.0;
            for t in 0..n {
                let y = gold[t];
                gold_score += emit[t][y];
                if !lat.na[t] {
                    for &f in &lat.feats[t] {
                        grad[model.emission_index(f, y)] += 1.0;
                    }
                    for c in 0..k {
                        let p = (fb.alpha[t][c] + fb.beta[t][c] - fb.log_z).exp();
                        for &f in &lat.feats[t] {
                            grad[model.emission_index(f, c)] -= p;
                        }
                    }
                }
                if t > 0 {
                    let yp = gold[t - 1];
                    gold_score += w[model.transition_index(yp, y)];
                    grad[model.transition_index(yp, y)] += 1.0;
                    for a in lat.allowed(t - 1, k) {
                        for b in lat.allowed(t, k) {
                            let idx = model.transition_index(a, b);
                            let p = (fb.alpha[t - 1][a] + w[idx] + emit[t][b] + fb.beta[t][b]
                                - fb.log_z)
                                .exp();
                            grad[idx] -= p;
                        }
                    }
                }
            }
            value += gold_score - fb.log_z;
        }
        let mut norm = 0.0;
        for (g, wi) in grad.iter_mut().zip(w) {
            *g -= 2.0 * lambda * wi;
            norm += wi * wi;
        }
        value - lambda * norm
    }
}

/// Value and gradient of the regularized log-likelihood of `batch` at the
/// model's current weights.
pub fn crf_loglik_grad(model: &CrfModel, batch: &[LabeledSentence]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let data = CrfTraining::new(model, batch)?;
    let mut grad = vec![0.0; model.weights.len()];
    let value = data.evaluate(model, &model.weights, &mut grad);
    Ok((value, grad))
}

/// Feature strings of every word position, in first-occurrence order.
fn collect_features(corpus: &[LabeledSentence]) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for s in corpus {
        for (i, l) in s.labels.iter().enumerate() {
            if l.is_none() {
                continue;
            }
            for f in crf_featurize(&s.tokens, i) {
                if !seen.contains_key(&f) {
                    seen.insert(f.clone(), ());
                    out.push(f);
                }
            }
        }
    }
    out
}

/// Fits a CRF by maximizing the L2-regularized conditional log-likelihood
/// with L-BFGS from zero weights. Returns the model and the objective after
/// each accepted step.
pub fn crf_train(corpus: &[LabeledSentence], n_classes: u8, hyper: CrfHyper) -> Result<(CrfModel, Vec<f64>)> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty training corpus"));
    }
    let mut model = CrfModel::new(n_classes, collect_features(corpus), hyper)?;
    let data = CrfTraining::new(&model, corpus)?;
    info!(
        "training CRF: {} sentences, {} features, {} weights",
        corpus.len(),
        model.features.len(),
        model.weights.len()
    );
    let cfg = LbfgsConfig {
        max_iterations: hyper.max_iterations,
        tolerance: hyper.tolerance,
        ..Default::default()
    };
    let report = minimize(
        model.weights.clone(),
        |w, g| {
            let v = data.evaluate(&model, w, g);
            g.iter_mut().for_each(|x| *x = -*x);
            -v
        },
        &cfg,
    )?;
    if !report.value.is_finite() || report.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(format!(
            "objective {} after {} iterations",
            -report.value, report.iterations
        )));
    }
    info!(
        "CRF converged={} after {} iterations, objective {:.4}",
        report.converged, report.iterations, -report.value
    );
    model.weights = report.x;
    let history = report.history.iter().map(|v| -v).collect();
    Ok((model, history))
}

impl Tagger for CrfModel {
    fn n_classes(&self) -> u8 {
        self.n_classes
    }

    fn predict(&self, tokens: &[String]) -> Vec<Label> {
        viterbi(self, tokens)
    }
}
