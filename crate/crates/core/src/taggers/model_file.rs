//! Versioned plain-text model files.
//!
//! ```text
//! prosolab-model<TAB>1
//! type<TAB>crf
//! classes<TAB>3
//! <key><TAB><value>          (hyperparameters)
//! <section><TAB><count>
//! <rows ...>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so identical training
//! runs produce identical bytes and loading restores weights exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    CrfHyper, CrfModel, EmbedHyper, EmbeddingClassifier, MajorityMode, MajorityModel,
    RandomModel, Tagger,
};
use crate::corpus_io::{EmbeddingTable, Label};
use crate::{Error, Result};

const MAGIC: &str = "prosolab-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Majority(MajorityModel),
    Random(RandomModel),
    Crf(CrfModel),
    Embed(EmbeddingClassifier),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Majority(_) => "majority",
            Model::Random(_) => "random",
            Model::Crf(_) => "crf",
            Model::Embed(_) => "embed",
        }
    }
}

impl Tagger for Model {
    fn n_classes(&self) -> u8 {
        match self {
            Model::Majority(m) => m.n_classes(),
            Model::Random(m) => m.n_classes(),
            Model::Crf(m) => m.n_classes(),
            Model::Embed(m) => m.n_classes(),
        }
    }

    fn predict(&self, tokens: &[String]) -> Vec<Label> {
        match self {
            Model::Majority(m) => m.predict(tokens),
            Model::Random(m) => m.predict(tokens),
            Model::Crf(m) => m.predict(tokens),
            Model::Embed(m) => m.predict(tokens),
        }
    }
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\t")
}

pub fn save_model(model: &Model) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}\t{VERSION}").unwrap();
    writeln!(out, "type\t{}", model.kind()).unwrap();
    match model {
        Model::Majority(m) => {
            writeln!(out, "classes\t{}", m.n_classes).unwrap();
            writeln!(out, "mode\t{}", m.mode).unwrap();
            writeln!(out, "global\t{}", join(&m.global)).unwrap();
            writeln!(out, "words\t{}", m.per_word.len()).unwrap();
            for (w, c) in &m.per_word {
                writeln!(out, "{w}\t{}", join(c)).unwrap();
            }
        }
        Model::Random(m) => {
            writeln!(out, "classes\t{}", m.n_classes).unwrap();
            writeln!(out, "seed\t{}", m.seed).unwrap();
        }
        Model::Crf(m) => {
            writeln!(out, "classes\t{}", m.n_classes).unwrap();
            writeln!(out, "l2_lambda\t{}", m.hyper.l2_lambda).unwrap();
            writeln!(out, "max_iterations\t{}", m.hyper.max_iterations).unwrap();
            writeln!(out, "tolerance\t{}", m.hyper.tolerance).unwrap();
            let s = m.states();
            writeln!(out, "transitions\t{s}").unwrap();
            for a in 0..s {
                let row: Vec<f64> = (0..s).map(|b| m.transition(a, b)).collect();
                writeln!(out, "{}", join(&row)).unwrap();
            }
            writeln!(out, "features\t{}", m.features.len()).unwrap();
            let k = m.k();
            for (i, f) in m.features.iter().enumerate() {
                writeln!(out, "{f}\t{}", join(&m.weights[i * k..(i + 1) * k])).unwrap();
            }
        }
        Model::Embed(m) => {
            writeln!(out, "classes\t{}", m.n_classes).unwrap();
            writeln!(out, "dimension\t{}", m.table.dimension()).unwrap();
            writeln!(out, "l2_lambda\t{}", m.hyper.l2_lambda).unwrap();
            writeln!(out, "max_iterations\t{}", m.hyper.max_iterations).unwrap();
            writeln!(out, "tolerance\t{}", m.hyper.tolerance).unwrap();
            writeln!(out, "weights\t{}", m.weights.len()).unwrap();
            for row in &m.weights {
                writeln!(out, "{}", join(row)).unwrap();
            }
        }
    }
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::invalid("model file ends early"))
    }

    fn key(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, l) = self.next()?;
        match l.split_once('\t') {
            Some((k, v)) if k == key => Ok((line, v)),
            _ => Err(Error::parse(line, format!("expected `{key}`, found {l:?}"))),
        }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.key(key)?;
        v.parse()
            .map_err(|_| Error::parse(line, format!("bad value for {key}: {v:?}")))
    }
}

fn parse_row<T: std::str::FromStr>(line: usize, fields: &str, want: usize) -> Result<Vec<T>> {
    let row = fields
        .split('\t')
        .map(|f| f.parse::<T>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::parse(line, "non-numeric model value"))?;
    if row.len() != want {
        return Err(Error::parse(
            line,
            format!("expected {want} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

/// Reads a model file. Embedding classifiers need the table they were
/// trained with, since vectors are not stored in the model file.
pub fn load_model(text: &str, embeddings: Option<&EmbeddingTable>) -> Result<Model> {
    let text = crate::corpus_io::normalize_newlines(text);
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let version: u32 = r.value(MAGIC)?;
    if version != VERSION {
        return Err(Error::invalid(format!("unsupported model version {version}")));
    }
    let kind: String = r.value("type")?;
    let n_classes: u8 = r.value("classes")?;
    super::check_classes(n_classes)?;
    let k = n_classes as usize;
    match kind.as_str() {
        "majority" => {
            let mode: MajorityMode = r.value("mode")?;
            let (line, g) = r.key("global")?;
            let global = parse_row(line, g, k)?;
            let n: usize = r.value("words")?;
            let mut per_word = BTreeMap::new();
            for _ in 0..n {
                let (line, l) = r.next()?;
                let (w, counts) = l
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(line, "malformed word row"))?;
                per_word.insert(w.to_string(), parse_row(line, counts, k)?);
            }
            Ok(Model::Majority(MajorityModel {
                n_classes,
                per_word,
                global,
                mode,
            }))
        }
        "random" => Ok(Model::Random(RandomModel {
            n_classes,
            seed: r.value("seed")?,
        })),
        "crf" => {
            let hyper = CrfHyper {
                l2_lambda: r.value("l2_lambda")?,
                max_iterations: r.value("max_iterations")?,
                tolerance: r.value("tolerance")?,
            };
            let s: usize = r.value("transitions")?;
            if s != k + 1 {
                return Err(Error::invalid(format!("{s} transition states for {k} classes")));
            }
            let mut transitions = Vec::with_capacity(s * s);
            for _ in 0..s {
                let (line, l) = r.next()?;
                transitions.extend(parse_row::<f64>(line, l, s)?);
            }
            let n: usize = r.value("features")?;
            let mut features = Vec::with_capacity(n);
            let mut emissions = Vec::with_capacity(n * k);
            for _ in 0..n {
                let (line, l) = r.next()?;
                let (f, w) = l
                    .rsplitn(k + 1, '\t')
                    .collect::<Vec<_>>()
                    .split_last()
                    .map(|(f, w)| (f.to_string(), w.iter().rev().copied().collect::<Vec<_>>()))
                    .ok_or_else(|| Error::parse(line, "malformed feature row"))?;
                emissions.extend(parse_row::<f64>(line, &w.join("\t"), k)?);
                features.push(f);
            }
            let mut model = CrfModel::new(n_classes, features, hyper)?;
            emissions.extend(transitions);
            model.weights = emissions;
            Ok(Model::Crf(model))
        }
        "embed" => {
            let dim: usize = r.value("dimension")?;
            let table = embeddings
                .ok_or_else(|| Error::invalid("embedding model needs its embedding table"))?;
            if table.dimension() != dim {
                return Err(Error::invalid(format!(
                    "model expects {dim}-dimensional embeddings, table has {}",
                    table.dimension()
                )));
            }
            let hyper = EmbedHyper {
                l2_lambda: r.value("l2_lambda")?,
                max_iterations: r.value("max_iterations")?,
                tolerance: r.value("tolerance")?,
            };
            let rows: usize = r.value("weights")?;
            if rows != k {
                return Err(Error::invalid(format!("{rows} weight rows for {k} classes")));
            }
            let weights = (0..rows)
                .map(|_| {
                    let (line, l) = r.next()?;
                    parse_row(line, l, 3 * dim + 1)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Model::Embed(EmbeddingClassifier {
                n_classes,
                table: table.clone(),
                weights,
                hyper,
            }))
        }
        other => Err(Error::invalid(format!("unknown model type {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taggers::{crf_train, train_majority, LabeledSentence};

    fn corpus() -> Vec<LabeledSentence> {
        let s = |w: &[&str], l: &[Label]| {
            LabeledSentence::new(w.iter().map(|x| x.to_string()).collect(), l.to_vec()).unwrap()
        };
        vec![
            s(&["Tell", "me", ",", "pig"], &[Some(2), Some(0), None, Some(1)]),
            s(&["where", "is", "the", "pig", "?"], &[Some(2), Some(0), Some(0), Some(1), None]),
        ]
    }

    #[test]
    fn majority_round_trip() {
        let m = Model::Majority(train_majority(&corpus(), 3).unwrap());
        let text = save_model(&m);
        assert_eq!(load_model(&text, None).unwrap(), m);
    }

    #[test]
    fn crf_round_trip_is_exact() {
        let (crf, _) = crf_train(&corpus(), 3, CrfHyper::default()).unwrap();
        let m = Model::Crf(crf);
        let text = save_model(&m);
        let back = load_model(&text, None).unwrap();
        assert_eq!(back, m);
        assert_eq!(save_model(&back), text);
    }

    #[test]
    fn random_round_trip() {
        let m = Model::Random(RandomModel { n_classes: 2, seed: 42 });
        assert_eq!(load_model(&save_model(&m), None).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_model("", None).is_err());
        assert!(load_model("prosolab-model\t9\n", None).is_err());
        assert!(load_model("prosolab-model\t1\ntype\tsvm\nclasses\t3\n", None).is_err());
        assert!(load_model("prosolab-model\t1\ntype\tembed\nclasses\t3\ndimension\t2\n", None).is_err());
    }
}
