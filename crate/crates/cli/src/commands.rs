//! Calibration, training, prediction and evaluation commands.

use std::fs;
use std::path::Path;

use log::{info, warn};
use prosolab::config::RunConfig;
use prosolab::corpus_io::{load_embeddings, parse_dataset, EmbeddingTable, Label};
use prosolab::discretize::{calibrate_binary, split_prominent};
use prosolab::eval::{
    evaluate_tagger, learning_curve as curve, parse_fractions, report_tsv, summary_table,
    ConfusionMatrix, ReportRow,
};
use prosolab::taggers::{
    corpus_from_dataset, crf_train, load_model, save_model, train_embed_classifier, train_majority,
    LabeledSentence, MajorityMode, Model, Tagger,
};

use crate::{CalibrateMode, CliError, CliResult, GlobalOpts, ModelKind};

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        prosolab::Error::Invalid(format!("cannot read {}: {e}", path.display())).into()
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| {
        prosolab::Error::Invalid(format!("cannot write {}: {e}", path.display())).into()
    })
}

fn read_corpus(path: &Path, n_classes: u8) -> CliResult<Vec<LabeledSentence>> {
    let sentences = parse_dataset(&read(path)?)?;
    Ok(corpus_from_dataset(&sentences, n_classes)?)
}

/// Loads an embedding file; the dimension comes from its first line.
fn read_embeddings(path: &Path) -> CliResult<EmbeddingTable> {
    let text = read(path)?;
    let dimension = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map_or(0, |l| l.split_whitespace().count().saturating_sub(1));
    Ok(load_embeddings(&text, dimension)?)
}

fn optional_embeddings(path: Option<&Path>) -> CliResult<Option<EmbeddingTable>> {
    path.map(read_embeddings).transpose()
}

fn name_of(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn calibrate(
    g: &GlobalOpts,
    values: &Path,
    reference: Option<&Path>,
    mode: CalibrateMode,
    theta1: Option<f64>,
) -> CliResult<()> {
    let cfg = g.run_config()?;
    let sentences = parse_dataset(&read(values)?)?;
    let mut tokens = Vec::new();
    let mut continuous = Vec::new();
    for r in sentences.iter().flatten() {
        if let Some(c) = r.continuous {
            tokens.push(r.token.as_str());
            continuous.push(c);
        }
    }
    let mut theta1 = theta1.unwrap_or(cfg.annotation.thresholds.theta1);
    if mode != CalibrateMode::Split {
        let reference = reference
            .ok_or_else(|| CliError::Usage("--reference is required unless --mode split".into()))?;
        let ref_sentences = parse_dataset(&read(reference)?)?;
        let mut labels = Vec::new();
        let mut ref_tokens = Vec::new();
        for r in ref_sentences.iter().flatten() {
            if let Some(d) = r.discrete {
                ref_tokens.push(r.token.as_str());
                labels.push(u8::from(d > 0));
            }
        }
        if ref_tokens != tokens {
            return Err(prosolab::Error::Invalid(
                "reference tokens do not match the values file".into(),
            )
            .into());
        }
        let c = calibrate_binary(&continuous, &labels)?;
        theta1 = c.thresholds.theta1;
        eprintln!("agreement {:.4}", c.agreement);
        println!("theta1 = {theta1}");
    }
    if mode != CalibrateMode::Binary {
        let split = split_prominent(&continuous, theta1)?;
        if split.degenerate {
            eprintln!("warning: degenerate split, class 1 would be empty");
        }
        if mode == CalibrateMode::Split {
            println!("theta1 = {theta1}");
        }
        println!("theta2 = {}", split.theta2);
    }
    Ok(())
}

fn train_model(
    kind: ModelKind,
    corpus: &[LabeledSentence],
    cfg: &RunConfig,
    embeddings: Option<&EmbeddingTable>,
    majority_mode: MajorityMode,
) -> CliResult<(Model, Option<f64>, usize)> {
    let n = cfg.annotation.n_classes;
    Ok(match kind {
        ModelKind::Majority => {
            let m = train_majority(corpus, n)?.with_mode(majority_mode);
            let entries = m.per_word.len();
            (Model::Majority(m), None, entries)
        }
        ModelKind::Crf => {
            let (m, history) = crf_train(corpus, n, cfg.crf)?;
            let features = m.features.len();
            (Model::Crf(m), history.last().copied(), features)
        }
        ModelKind::Embed => {
            let table = embeddings
                .ok_or_else(|| CliError::Usage("--embeddings is required for embed".into()))?;
            let (m, history) = train_embed_classifier(corpus, table, n, cfg.embed)?;
            let inputs = m.input_width();
            (Model::Embed(m), history.last().copied(), inputs)
        }
    })
}

pub fn train(
    g: &GlobalOpts,
    kind: ModelKind,
    train: &Path,
    out: &Path,
    embeddings: Option<&Path>,
    majority_mode: MajorityMode,
) -> CliResult<()> {
    let cfg = g.run_config()?;
    let table = optional_embeddings(embeddings)?;
    let corpus = read_corpus(train, cfg.annotation.n_classes)?;
    let (model, objective, features) =
        train_model(kind, &corpus, &cfg, table.as_ref(), majority_mode)?;
    write(out, &save_model(&model))?;
    if let Some(o) = objective {
        println!("objective\t{o:.6}");
    }
    println!("features\t{features}");
    Ok(())
}

/// Sentences of tokens from the first column of a tab-separated file.
fn read_tokens(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let text = read(path)?;
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        cur.push(line.split('\t').next().unwrap_or_default().to_string());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn label_text(l: Label) -> String {
    l.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn predict(
    model: &Path,
    input: &Path,
    out: Option<&Path>,
    embeddings: Option<&Path>,
) -> CliResult<()> {
    let table = optional_embeddings(embeddings)?;
    let model = load_model(&read(model)?, table.as_ref())?;
    let mut text = String::new();
    for (i, tokens) in read_tokens(input)?.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        for (t, l) in tokens.iter().zip(model.predict(tokens)) {
            text.push_str(&format!("{t}\t{}\n", label_text(l)));
        }
    }
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_predictions(path: &Path, test: &[LabeledSentence], n_classes: u8) -> CliResult<ConfusionMatrix> {
    let text = read(path)?;
    let mut sentences: Vec<Vec<(String, Label)>> = vec![Vec::new()];
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !sentences.last().is_some_and(Vec::is_empty) {
                sentences.push(Vec::new());
            }
            continue;
        }
        let bad = || prosolab::Error::Parse {
            line: idx + 1,
            msg: format!("expected token<TAB>label, found {line:?}"),
        };
        let (tok, label) = line.split_once('\t').ok_or_else(bad)?;
        let label = match label {
            "NA" => None,
            v => Some(v.parse::<u8>().map_err(|_| bad())?),
        };
        sentences.last_mut().unwrap().push((tok.to_string(), label));
    }
    if sentences.last().is_some_and(Vec::is_empty) {
        sentences.pop();
    }
    if sentences.len() != test.len() {
        return Err(prosolab::Error::Invalid(format!(
            "{} predicted sentences for {} test sentences",
            sentences.len(),
            test.len()
        ))
        .into());
    }
    let mut m = ConfusionMatrix::new(n_classes);
    for (pred, gold) in sentences.iter().zip(test) {
        if pred.iter().map(|p| &p.0).ne(gold.tokens.iter()) {
            return Err(prosolab::Error::Invalid("prediction tokens differ from test tokens".into()).into());
        }
        let labels: Vec<Label> = pred.iter().map(|p| p.1).collect();
        let one = prosolab::eval::confusion(&labels, &gold.labels, n_classes)?;
        for (row, add) in m.counts.iter_mut().zip(one.counts) {
            for (c, a) in row.iter_mut().zip(add) {
                *c += a;
            }
        }
    }
    Ok(m)
}

pub fn evaluate(
    g: &GlobalOpts,
    models: &[std::path::PathBuf],
    predictions: &[std::path::PathBuf],
    test: &Path,
    embeddings: Option<&Path>,
    report: Option<&Path>,
    confusion_dir: Option<&Path>,
) -> CliResult<()> {
    if models.is_empty() && predictions.is_empty() {
        return Err(CliError::Usage("give at least one --model or --predictions".into()));
    }
    let cfg = g.run_config()?;
    let table = optional_embeddings(embeddings)?;
    let test_sentences = parse_dataset(&read(test)?)?;
    let mut results: Vec<(String, ConfusionMatrix)> = Vec::new();
    for path in models {
        let model = load_model(&read(path)?, table.as_ref())?;
        let gold = corpus_from_dataset(&test_sentences, model.n_classes())?;
        results.push((name_of(path), evaluate_tagger(&model, &gold)?));
    }
    for path in predictions {
        let n = cfg.annotation.n_classes;
        let gold = corpus_from_dataset(&test_sentences, n)?;
        results.push((name_of(path), read_predictions(path, &gold, n)?));
    }
    let rows: Vec<ReportRow> = results
        .iter()
        .map(|(name, m)| ReportRow {
            model: name.clone(),
            n_classes: m.counts.len() as u8,
            fraction: 1.0,
            accuracy: m.accuracy(),
        })
        .collect();
    print!("{}", summary_table(&rows));
    if let Some(p) = report {
        write(p, &report_tsv(&rows))?;
    }
    if let Some(dir) = confusion_dir {
        fs::create_dir_all(dir).map_err(prosolab::Error::from)?;
        for (name, m) in &results {
            let file = dir.join(format!("{name}.{}-way.confusion.tsv", m.counts.len()));
            write(&file, &m.to_tsv())?;
        }
    }
    Ok(())
}

pub fn learning_curve(
    g: &GlobalOpts,
    kind: ModelKind,
    train: &Path,
    test: &Path,
    fractions: &str,
    out: Option<&Path>,
    embeddings: Option<&Path>,
) -> CliResult<()> {
    let cfg = g.run_config()?;
    let fractions = parse_fractions(fractions).map_err(|e| CliError::Usage(e.to_string()))?;
    let table = optional_embeddings(embeddings)?;
    if kind == ModelKind::Embed && table.is_none() {
        return Err(CliError::Usage("--embeddings is required for embed".into()));
    }
    let n = cfg.annotation.n_classes;
    let train_corpus = read_corpus(train, n)?;
    let test_corpus = read_corpus(test, n)?;
    let mut failure = None;
    let points = curve(
        |subset| {
            train_model(kind, subset, &cfg, table.as_ref(), MajorityMode::PerWord)
                .map(|(m, _, _)| m)
                .map_err(|e| match e {
                    CliError::Data(d) => d,
                    CliError::Usage(u) => {
                        failure = Some(u.clone());
                        prosolab::Error::Invalid(u)
                    }
                })
        },
        &train_corpus,
        &test_corpus,
        &fractions,
        cfg.seed,
    );
    if let Some(u) = failure {
        return Err(CliError::Usage(u));
    }
    let points = points?;
    let name = format!("{kind:?}").to_lowercase();
    let rows: Vec<ReportRow> = points
        .iter()
        .map(|p| {
            info!("{name} {:.2}: {:.4}", p.fraction, p.accuracy);
            ReportRow {
                model: name.clone(),
                n_classes: n,
                fraction: p.fraction,
                accuracy: p.accuracy,
            }
        })
        .collect();
    if rows.windows(2).any(|w| w[1].accuracy + 0.005 < w[0].accuracy) {
        warn!("accuracy drops by more than 0.5 points between consecutive fractions");
    }
    let tsv = report_tsv(&rows);
    match out {
        Some(p) => write(p, &tsv),
        None => {
            print!("{tsv}");
            Ok(())
        }
    }
}
