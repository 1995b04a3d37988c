//! Batch annotation of an aligned corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use log::{info, warn};
use prosolab::config::RunConfig;
use prosolab::corpus_io::{parse_lab, parse_textgrid, read_wav, write_dataset, ProminenceRecord, Utterance};
use prosolab::prominence::{analyze_utterance, loma_tsv, records_from_values};
use rayon::prelude::*;

use crate::{CliError, CliResult, GlobalOpts};

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Directory of mono 16-bit WAV files named `<utterance>.wav`.
    #[arg(long)]
    pub audio_dir: PathBuf,
    /// Directory of `.lab` or `.TextGrid` word alignments.
    #[arg(long)]
    pub align_dir: PathBuf,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest; defaults to `<out>.manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Word tier name in TextGrid files.
    #[arg(long, default_value = "words")]
    pub tier: String,
    /// Write composite signal, scalogram and lines of maximum amplitude here.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

struct Job {
    id: String,
    alignment: PathBuf,
}

fn alignment_files(dir: &Path) -> CliResult<Vec<Job>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut jobs = Vec::new();
    for entry in entries {
        let path = entry.map_err(prosolab::Error::from)?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("lab" | "textgrid")) {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        jobs.push(Job {
            id: id.to_string(),
            alignment: path.clone(),
        });
    }
    jobs.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.alignment.cmp(&b.alignment)));
    Ok(jobs)
}

fn load_alignment(job: &Job, tier: &str) -> prosolab::Result<Utterance> {
    let text = fs::read_to_string(&job.alignment)?;
    let is_lab = job
        .alignment
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("lab"));
    if is_lab {
        parse_lab(&text, &job.id)
    } else {
        parse_textgrid(&text, tier, &job.id)
    }
}

type Outcome = Result<(Utterance, Vec<ProminenceRecord>), String>;

fn process(job: &Job, args: &AnnotateArgs, cfg: &RunConfig) -> Outcome {
    let wav = args.audio_dir.join(format!("{}.wav", job.id));
    if !wav.is_file() {
        return Err("missing audio".to_string());
    }
    let utt = load_alignment(job, &args.tier).map_err(|e| format!("alignment: {e}"))?;
    let bytes = fs::read(&wav).map_err(|e| format!("audio: {e}"))?;
    let audio = read_wav(&bytes).map_err(|e| format!("audio: {e}"))?;
    let analysis = analyze_utterance(&audio, &utt, &cfg.annotation).map_err(|e| e.to_string())?;
    if let Some(dir) = &args.dump_dir {
        dump(dir, &job.id, &analysis).map_err(|e| format!("dump: {e}"))?;
    }
    let records =
        records_from_values(&utt, &analysis.values, &cfg.annotation).map_err(|e| e.to_string())?;
    Ok((utt, records))
}

fn dump(dir: &Path, id: &str, a: &prosolab::prominence::UtteranceAnalysis) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(c) = &a.composite {
        let mut text = String::from("time\tvalue\n");
        for (i, v) in c.values.iter().enumerate() {
            text.push_str(&format!("{:.4}\t{v:.6}\n", c.time_of(i)));
        }
        fs::write(dir.join(format!("{id}.composite.tsv")), text)?;
    }
    if let Some(s) = &a.scalogram {
        fs::write(dir.join(format!("{id}.scalogram.tsv")), s.to_tsv())?;
        fs::write(dir.join(format!("{id}.loma.tsv")), loma_tsv(s, &a.lomas))?;
    }
    Ok(())
}

fn manifest(cfg: &RunConfig, jobs: &[Job], outcomes: &[Outcome]) -> String {
    let ok = outcomes.iter().filter(|o| o.is_ok()).count();
    let failed = outcomes.len() - ok;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut text = format!("# created {stamp}\n# config\n");
    for line in cfg.to_text().lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(&format!("{ok} ok, {failed} failed\n"));
    for (job, o) in jobs.iter().zip(outcomes) {
        match o {
            Ok(_) => text.push_str(&format!("{}\tok\n", job.id)),
            Err(e) => text.push_str(&format!("{}\tfailed\t{e}\n", job.id)),
        }
    }
    text
}

pub fn run(args: &AnnotateArgs, g: &GlobalOpts) -> CliResult<()> {
    let cfg = g.run_config()?;
    let jobs = alignment_files(&args.align_dir)?;
    if jobs.is_empty() {
        return Err(prosolab::Error::Invalid(format!(
            "no .lab or .TextGrid files in {}",
            args.align_dir.display()
        ))
        .into());
    }
    info!("annotating {} utterances with {} jobs", jobs.len(), cfg.jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> =
        pool.install(|| jobs.par_iter().map(|j| process(j, args, &cfg)).collect());
    for (job, o) in jobs.iter().zip(&outcomes) {
        if let Err(e) = o {
            warn!("{}: {e}", job.id);
        }
    }
    let done: Vec<_> = outcomes.iter().filter_map(|o| o.as_ref().ok().cloned()).collect();
    fs::write(&args.out, write_dataset(&done)?).map_err(prosolab::Error::from)?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest", args.out.display())));
    let text = manifest(&cfg, &jobs, &outcomes);
    fs::write(&manifest_path, &text).map_err(prosolab::Error::from)?;
    let summary = text.lines().find(|l| !l.starts_with('#')).unwrap_or_default();
    println!("{summary}");
    if done.is_empty() {
        return Err(prosolab::Error::Invalid("every utterance failed".into()).into());
    }
    Ok(())
}
