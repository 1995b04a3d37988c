//! Composite signal, Mexican-hat wavelet scalogram, lines of maximum
//! amplitude, and per-word continuous prominence.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::acoustics::{duration_track, extract_energy, extract_f0, FrameTrack, PitchConfig};
use crate::conditioning::{condition, reflect, Normalized};
use crate::corpus_io::{AudioBuffer, ProminenceRecord, Utterance};
use crate::discretize::{discretize_value, Thresholds};
use crate::{Error, Result};

/// How the three normalized streams are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeMode {
    Sum,
    Product,
}

impl std::str::FromStr for CompositeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "product" => Ok(Self::Product),
            other => Err(Error::invalid(format!("unknown composite mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for CompositeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Product => "product",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeConfig {
    pub w_f0: f64,
    pub w_energy: f64,
    pub w_dur: f64,
    pub mode: CompositeMode,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        Self {
            w_f0: 1.0,
            w_energy: 0.5,
            w_dur: 1.0,
            mode: CompositeMode::Product,
        }
    }
}

impl CompositeConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_f0, self.w_energy, self.w_dur];
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || w.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid(format!(
                "stream weights must be non-negative with at least one positive, got {w:?}"
            )));
        }
        Ok(())
    }
}

/// Shift added after subtracting a stream's minimum in product mode.
const PRODUCT_OFFSET: f64 = 1.0;

/// Combines conditioned F0, energy, and duration streams frame by frame.
///
/// Sum mode is the weighted sum. Product mode multiplies
/// `(s - min(s) + 1)^w` over the streams, so each factor is at least 1 and a
/// zero weight removes the stream.
pub fn compose(f0: &FrameTrack, energy: &FrameTrack, dur: &FrameTrack, cfg: &CompositeConfig) -> Result<FrameTrack> {
    cfg.validate()?;
    let streams = [(f0, cfg.w_f0), (energy, cfg.w_energy), (dur, cfg.w_dur)];
    for (t, _) in &streams[1..] {
        if t.len() != f0.len() || (t.frame_shift_s - f0.frame_shift_s).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "stream mismatch: {} frames @ {} s vs {} frames @ {} s",
                t.len(),
                t.frame_shift_s,
                f0.len(),
                f0.frame_shift_s
            )));
        }
    }
    if streams.iter().any(|(t, _)| !t.all_valid()) {
        return Err(Error::invalid("composite streams must be fully valid"));
    }
    let n = f0.len();
    let values = match cfg.mode {
        CompositeMode::Sum => (0..n)
            .map(|i| streams.iter().map(|(t, w)| w * t.values[i]).sum())
            .collect(),
        CompositeMode::Product => {
            let mins: Vec<f64> = streams
                .iter()
                .map(|(t, _)| t.values.iter().copied().fold(f64::INFINITY, f64::min))
                .collect();
            (0..n)
                .map(|i| {
                    streams
                        .iter()
                        .zip(&mins)
                        .filter(|((_, w), _)| *w != 0.0)
                        .map(|((t, w), m)| (t.values[i] - m + PRODUCT_OFFSET).powf(*w))
                        .product()
                })
                .collect()
        }
    };
    Ok(FrameTrack {
        values,
        valid: vec![true; n],
        frame_shift_s: f0.frame_shift_s,
        start_s: f0.start_s,
    })
}

/// Geometric grid of wavelet periods, finest first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleGrid {
    pub n_scales: usize,
    pub min_period_s: f64,
    pub scales_per_octave: usize,
}

impl Default for ScaleGrid {
    fn default() -> Self {
        Self {
            n_scales: 12,
            min_period_s: 0.1,
            scales_per_octave: 2,
        }
    }
}

impl ScaleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_scales == 0 || self.scales_per_octave == 0 || !(self.min_period_s > 0.0) {
            return Err(Error::invalid(format!("invalid scale grid {self:?}")));
        }
        Ok(())
    }

    pub fn period_s(&self, row: usize) -> f64 {
        self.min_period_s * 2f64.powf(row as f64 / self.scales_per_octave as f64)
    }

    /// Mexican-hat scale parameter for a row: `period / (2π√2)`.
    pub fn scale_s(&self, row: usize) -> f64 {
        self.period_s(row) / (2.0 * PI * 2f64.sqrt())
    }

    pub fn coarsest_period_s(&self) -> f64 {
        self.period_s(self.n_scales - 1)
    }

    /// The same grid with as many rows as fit a track of `duration_s`
    /// (coarsest period ≤ 2 × duration), or `None` if not even one fits.
    pub fn fitted(&self, duration_s: f64) -> Option<Self> {
        let fits = (0..self.n_scales)
            .take_while(|&r| self.period_s(r) <= 2.0 * duration_s + 1e-12)
            .count();
        (fits > 0).then_some(Self {
            n_scales: fits,
            ..*self
        })
    }
}

/// CWT coefficients; `coeffs[row][frame]`, row 0 finest.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub coeffs: Vec<Vec<f64>>,
    pub grid: ScaleGrid,
    pub frame_shift_s: f64,
}

impl Scalogram {
    pub fn n_frames(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    /// Tab-separated matrix, one line per scale (finest first), for plotting.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (row, c) in self.coeffs.iter().enumerate() {
            write!(out, "{:.6}", self.grid.period_s(row)).unwrap();
            for v in c {
                write!(out, "\t{v:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Mexican hat (negated second derivative of a Gaussian), unit L2 norm.
pub fn mexican_hat(t: f64) -> f64 {
    let norm = 2.0 / (3f64.sqrt() * PI.powf(0.25));
    norm * (1.0 - t * t) * (-0.5 * t * t).exp()
}

/// Continuous wavelet transform of the mean-removed track: row `i` holds
/// `a_i^(-1/2) Σ x(t) ψ((t - b) / a_i) Δt` with reflective boundaries.
pub fn cwt(track: &FrameTrack, grid: &ScaleGrid) -> Result<Scalogram> {
    grid.validate()?;
    if !track.all_valid() {
        return Err(Error::invalid("wavelet transform requires a fully valid track"));
    }
    let n = track.len();
    if n == 0 || grid.coarsest_period_s() > 2.0 * track.duration_s() + 1e-12 {
        return Err(Error::invalid(format!(
            "track of {:.3} s is too short for a coarsest wavelet period of {:.3} s",
            track.duration_s(),
            grid.coarsest_period_s()
        )));
    }
    let dt = track.frame_shift_s;
    let mean = track.values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = track.values.iter().map(|v| v - mean).collect();
    let coeffs = (0..grid.n_scales)
        .map(|row| {
            let a = grid.scale_s(row);
            let radius = (5.0 * a / dt).ceil() as isize;
            let gain = dt / a.sqrt();
            let kernel: Vec<f64> = (-radius..=radius)
                .map(|k| gain * mexican_hat(k as f64 * dt / a))
                .collect();
            (0..n as isize)
                .map(|b| {
                    kernel
                        .iter()
                        .zip(-radius..)
                        .map(|(w, k)| w * x[reflect(b + k, n)])
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(Scalogram {
        coeffs,
        grid: *grid,
        frame_shift_s: dt,
    })
}

/// Where lines of maximum amplitude may start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LomaSeeding {
    /// Only at maxima of the coarsest row.
    Coarsest,
    /// At the coarsest row, and at any finer-row maximum no line has reached.
    AllScales,
}

impl std::str::FromStr for LomaSeeding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarsest" => Ok(Self::Coarsest),
            "all" => Ok(Self::AllScales),
            other => Err(Error::invalid(format!("unknown loma seeding {other:?}"))),
        }
    }
}

impl std::fmt::Display for LomaSeeding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Coarsest => "coarsest",
            Self::AllScales => "all",
        })
    }
}

/// How a line's coefficients combine into its strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LomaValue {
    /// Sum along the path, favouring events salient at many scales.
    Sum,
    /// Largest coefficient on the path.
    Max,
}

impl std::str::FromStr for LomaValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            other => Err(Error::invalid(format!("unknown loma value {other:?}"))),
        }
    }
}

impl std::fmt::Display for LomaValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Max => "max",
        })
    }
}

/// A line of maximum amplitude: `(row, frame)` steps from its coarsest
/// point down to its finest, and the sum of coefficients along it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loma {
    pub path: Vec<(usize, usize)>,
    pub strength: f64,
}

impl Loma {
    pub fn endpoint(&self) -> (usize, usize) {
        *self.path.last().expect("loma path is never empty")
    }

    /// Largest coefficient visited by the line.
    pub fn peak(&self, s: &Scalogram) -> f64 {
        self.path
            .iter()
            .map(|&(r, f)| s.coeffs[r][f])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn positive_floor(s: &Scalogram) -> f64 {
    let peak = s
        .coeffs
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    peak * 1e-9
}

/// Local maximum with reflective neighbours: strictly above the left
/// neighbour, at least the right one (plateaus resolve to their left edge).
fn is_peak(row: &[f64], j: usize) -> bool {
    let n = row.len();
    let left = row[reflect(j as isize - 1, n)];
    let right = row[reflect(j as isize + 1, n)];
    n > 1 && row[j] > left && row[j] >= right
}

fn is_strict_peak(row: &[f64], j: usize) -> bool {
    let n = row.len();
    n > 1 && row[j] > row[reflect(j as isize - 1, n)] && row[j] > row[reflect(j as isize + 1, n)]
}

/// Traces lines of maximum amplitude from coarse to fine scales.
///
/// From each seed the line steps one row finer at a time, moving to the
/// positive local maximum nearest its current frame within a window of half
/// the coarser row's period (at least one frame). A line stops early when no
/// such maximum exists. Lines sharing an endpoint keep only the strongest.
pub fn extract_loma(s: &Scalogram, seeding: LomaSeeding) -> Vec<Loma> {
    let rows = s.coeffs.len();
    let n = s.n_frames();
    if rows == 0 || n == 0 {
        return Vec::new();
    }
    let floor = positive_floor(s);
    if floor == 0.0 {
        return Vec::new();
    }
    let top = rows - 1;
    let mut visited = vec![vec![false; n]; rows];
    let mut lines = Vec::new();
    let trace = |row: usize, frame: usize, visited: &mut Vec<Vec<bool>>| -> Loma {
        let mut path = vec![(row, frame)];
        let mut strength = s.coeffs[row][frame];
        visited[row][frame] = true;
        let mut f = frame;
        for r in (0..row).rev() {
            let half_period = s.grid.period_s(r + 1) / s.frame_shift_s / 2.0;
            let w = (half_period.round() as usize).max(1);
            let lo = f.saturating_sub(w);
            let hi = (f + w).min(n - 1);
            let c = &s.coeffs[r];
            let next = (lo..=hi)
                .filter(|&j| c[j] > floor && is_peak(c, j))
                .min_by(|&a, &b| {
                    a.abs_diff(f)
                        .cmp(&b.abs_diff(f))
                        .then(c[b].total_cmp(&c[a]))
                        .then(a.cmp(&b))
                });
            let Some(j) = next else { break };
            path.push((r, j));
            strength += c[j];
            visited[r][j] = true;
            f = j;
        }
        Loma { path, strength }
    };

    for j in 0..n {
        let c = &s.coeffs[top];
        if c[j] > floor && is_strict_peak(c, j) {
            lines.push(trace(top, j, &mut visited));
        }
    }
    if seeding == LomaSeeding::AllScales {
        for r in (0..top).rev() {
            for j in 0..n {
                let c = &s.coeffs[r];
                if !visited[r][j] && c[j] > floor && is_peak(c, j) {
                    lines.push(trace(r, j, &mut visited));
                }
            }
        }
    }

    // dedupe by endpoint: strongest wins, ties to the earlier start frame
    lines.sort_by(|a, b| {
        a.endpoint()
            .1
            .cmp(&b.endpoint().1)
            .then(a.endpoint().0.cmp(&b.endpoint().0))
            .then(b.strength.total_cmp(&a.strength))
            .then(a.path[0].1.cmp(&b.path[0].1))
    });
    lines.dedup_by(|later, kept| later.endpoint() == kept.endpoint());
    lines
}

/// Paths as TSV rows: `line<TAB>row<TAB>frame<TAB>coefficient`.
pub fn loma_tsv(s: &Scalogram, lomas: &[Loma]) -> String {
    let mut out = String::from("line\trow\tframe\tcoefficient\n");
    for (i, l) in lomas.iter().enumerate() {
        for &(r, f) in &l.path {
            writeln!(out, "{i}\t{r}\t{f}\t{:.6}", s.coeffs[r][f]).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordProminence {
    pub token_index: usize,
    pub value: f64,
}

/// Assigns each line to the word containing its finest endpoint (or the
/// nearest word by span-boundary distance) and scores each word by its
/// strongest line. Words with no line score 0. Punctuation is skipped.
pub fn word_prominence(lomas: &[Loma], utterance: &Utterance, frame_shift_s: f64) -> Vec<WordProminence> {
    let words: Vec<(usize, f64, f64)> = utterance
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_punct)
        .map(|(i, t)| (i, t.start_s, t.end_s))
        .collect();
    let mut best = vec![0.0f64; words.len()];
    for l in lomas {
        let t = l.endpoint().1 as f64 * frame_shift_s;
        let slot = words
            .iter()
            .position(|&(_, a, b)| t >= a && t < b)
            .or_else(|| {
                words
                    .iter()
                    .enumerate()
                    .map(|(k, &(_, a, b))| (k, if t < a { a - t } else { t - b }))
                    .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                    .map(|(k, _)| k)
            });
        if let Some(k) = slot {
            best[k] = best[k].max(l.strength);
        }
    }
    words
        .iter()
        .zip(best)
        .map(|(&(i, _, _), v)| WordProminence {
            token_index: i,
            value: v.max(0.0),
        })
        .collect()
}

/// Every parameter of the annotation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationConfig {
    pub pitch: PitchConfig,
    pub sigma_f0_s: f64,
    pub sigma_energy_s: f64,
    pub sigma_dur_s: f64,
    pub composite: CompositeConfig,
    pub grid: ScaleGrid,
    pub seeding: LomaSeeding,
    pub loma_value: LomaValue,
    pub thresholds: Thresholds,
    pub n_classes: u8,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            pitch: PitchConfig::default(),
            sigma_f0_s: 0.02,
            sigma_energy_s: 0.02,
            sigma_dur_s: 0.0,
            composite: CompositeConfig::default(),
            grid: ScaleGrid::default(),
            seeding: LomaSeeding::AllScales,
            loma_value: LomaValue::Sum,
            thresholds: Thresholds::default(),
            n_classes: 3,
        }
    }
}

/// Intermediate products of one utterance's annotation.
#[derive(Debug, Clone)]
pub struct UtteranceAnalysis {
    /// Continuous prominence per token; `None` for punctuation.
    pub values: Vec<Option<f64>>,
    /// `None` when the audio held no voiced frames.
    pub composite: Option<FrameTrack>,
    pub scalogram: Option<Scalogram>,
    pub lomas: Vec<Loma>,
}

fn truncated(t: &FrameTrack, n: usize) -> FrameTrack {
    FrameTrack {
        values: t.values[..n].to_vec(),
        valid: t.valid[..n].to_vec(),
        ..t.clone()
    }
}

/// Runs extraction, conditioning, composition, the wavelet transform and
/// line tracing for one utterance.
///
/// Audio with no voiced frame carries no pitch evidence; every word then
/// scores 0. The wavelet grid is trimmed to the rows that fit the utterance.
pub fn analyze_utterance(audio: &AudioBuffer, utterance: &Utterance, cfg: &AnnotationConfig) -> Result<UtteranceAnalysis> {
    let id = utterance.id.as_str();
    let shift = cfg.pitch.frame_shift_s;
    let dur = duration_track(utterance, shift, audio.duration_s()).map_err(|e| e.in_stage("duration", id))?;
    let f0 = extract_f0(audio, &cfg.pitch).map_err(|e| e.in_stage("pitch", id))?;
    let energy =
        extract_energy(audio, shift, cfg.pitch.window_s).map_err(|e| e.in_stage("energy", id))?;

    let words_only = |v: f64| -> Vec<Option<f64>> {
        utterance
            .tokens
            .iter()
            .map(|t| (!t.is_punct).then_some(v))
            .collect()
    };
    if !f0.valid.iter().any(|&v| v) {
        return Ok(UtteranceAnalysis {
            values: words_only(0.0),
            composite: None,
            scalogram: None,
            lomas: Vec::new(),
        });
    }

    let n = f0.len().min(energy.len()).min(dur.len());
    let cond = |t: &FrameTrack, sigma: f64| -> Result<Normalized> {
        condition(&truncated(t, n), sigma).map_err(|e| e.in_stage("conditioning", id))
    };
    let f0 = cond(&f0, cfg.sigma_f0_s)?;
    let energy = cond(&energy, cfg.sigma_energy_s)?;
    let dur = cond(&dur, cfg.sigma_dur_s)?;

    let composite = compose(&f0.track, &energy.track, &dur.track, &cfg.composite)
        .map_err(|e| e.in_stage("compose", id))?;
    let grid = cfg.grid.fitted(composite.duration_s()).ok_or_else(|| {
        Error::invalid(format!(
            "utterance of {:.3} s is shorter than half the finest wavelet period",
            composite.duration_s()
        ))
        .in_stage("cwt", id)
    })?;
    let scalogram = cwt(&composite, &grid).map_err(|e| e.in_stage("cwt", id))?;
    let mut lomas = extract_loma(&scalogram, cfg.seeding);
    if cfg.loma_value == LomaValue::Max {
        for l in &mut lomas {
            l.strength = l.peak(&scalogram);
        }
    }

    let mut values = words_only(0.0);
    for wp in word_prominence(&lomas, utterance, shift) {
        values[wp.token_index] = Some(wp.value);
    }
    Ok(UtteranceAnalysis {
        values,
        composite: Some(composite),
        scalogram: Some(scalogram),
        lomas,
    })
}

/// Annotates one utterance: one record per token, NA for punctuation.
pub fn annotate_utterance(audio: &AudioBuffer, utterance: &Utterance, cfg: &AnnotationConfig) -> Result<Vec<ProminenceRecord>> {
    let analysis = analyze_utterance(audio, utterance, cfg)?;
    records_from_values(utterance, &analysis.values, cfg)
}

pub fn records_from_values(utterance: &Utterance, values: &[Option<f64>], cfg: &AnnotationConfig) -> Result<Vec<ProminenceRecord>> {
    utterance
        .tokens
        .iter()
        .zip(values)
        .map(|(tok, &v)| {
            let discrete = discretize_value(v, &cfg.thresholds, cfg.n_classes)
                .map_err(|e| e.in_stage("discretize", &utterance.id))?;
            Ok(ProminenceRecord {
                token: tok.text.clone(),
                discrete,
                continuous: v,
            })
        })
        .collect()
}
