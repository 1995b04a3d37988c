//! Frame-synchronous prosodic streams: F0, log energy, and log word duration.
//!
//! Frame `i` is centred at `start_s + i * frame_shift_s`. Audio frames near
//! the edges use the nearest full analysis window, so every frame sees
//! exactly `window_s` seconds of signal.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus_io::{AudioBuffer, Utterance};
use crate::{Error, Result};

/// Floor applied to RMS before taking the log.
pub const ENERGY_FLOOR: f64 = 1e-6;
/// Frames quieter than this (Hann-weighted RMS) are never voiced.
pub const SILENCE_RMS: f64 = 1e-4;
// Praat's default octave cost: small per-octave bonus for shorter lags.
const OCTAVE_COST: f64 = 0.01;

/// A uniformly sampled signal with a per-frame validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrack {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub frame_shift_s: f64,
    pub start_s: f64,
}

impl FrameTrack {
    /// A fully valid track.
    pub fn from_values(values: Vec<f64>, frame_shift_s: f64) -> Self {
        let valid = vec![true; values.len()];
        Self {
            values,
            valid,
            frame_shift_s,
            start_s: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        self.start_s + frame as f64 * self.frame_shift_s
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 * self.frame_shift_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub frame_shift_s: f64,
    pub window_s: f64,
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f0_min: 60.0,
            f0_max: 400.0,
            frame_shift_s: 0.005,
            window_s: 0.040,
            voicing_threshold: 0.45,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return Err(Error::invalid(format!(
                "pitch range must satisfy 0 < f0_min < f0_max (got {} .. {})",
                self.f0_min, self.f0_max
            )));
        }
        if !(self.frame_shift_s > 0.0) {
            return Err(Error::invalid("frame shift must be positive"));
        }
        if self.window_s * self.f0_max < 2.0 {
            return Err(Error::invalid(format!(
                "window of {} s holds fewer than two periods of {} Hz",
                self.window_s, self.f0_max
            )));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return Err(Error::invalid("voicing threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Number of frames covering `duration_s` at `frame_shift_s`.
pub fn frame_count(duration_s: f64, frame_shift_s: f64) -> usize {
    ((duration_s / frame_shift_s) - 1e-9).ceil().max(1.0) as usize
}

struct Framing {
    starts: Vec<usize>,
    len: usize,
}

fn framing(audio: &AudioBuffer, frame_shift_s: f64, window_s: f64) -> Result<Framing> {
    if !(frame_shift_s > 0.0 && window_s > 0.0) {
        return Err(Error::invalid("frame shift and window must be positive"));
    }
    let sr = audio.sample_rate as f64;
    let len = (window_s * sr).round() as usize;
    let n = audio.samples.len();
    if len < 2 || n < len {
        return Err(Error::invalid(format!(
            "audio of {:.4} s is shorter than one {window_s} s analysis window",
            audio.duration_s()
        )));
    }
    let frames = frame_count(audio.duration_s(), frame_shift_s);
    let starts = (0..frames)
        .map(|i| {
            let centre = (i as f64 * frame_shift_s * sr).round() as i64;
            (centre - len as i64 / 2).clamp(0, (n - len) as i64) as usize
        })
        .collect();
    Ok(Framing { starts, len })
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * (k as f64 + 0.5) / len as f64).cos())
        .collect()
}

fn weighted_rms(seg: &[f64], window: &[f64], window_sum: f64) -> f64 {
    let acc: f64 = seg.iter().zip(window).map(|(x, w)| w * x * x).sum();
    (acc / window_sum).sqrt()
}

/// Log RMS energy per frame, `ln(max(rms, 1e-6))`, with a Hann-weighted RMS.
pub fn extract_energy(audio: &AudioBuffer, frame_shift_s: f64, window_s: f64) -> Result<FrameTrack> {
    let fr = framing(audio, frame_shift_s, window_s)?;
    let window = hann(fr.len);
    let wsum: f64 = window.iter().sum();
    let values = fr
        .starts
        .iter()
        .map(|&s| {
            let rms = weighted_rms(&audio.samples[s..s + fr.len], &window, wsum);
            rms.max(ENERGY_FLOOR).ln()
        })
        .collect();
    Ok(FrameTrack::from_values(values, frame_shift_s))
}

/// Autocorrelation of real sequences through a zero-padded FFT.
struct Autocorrelator {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl Autocorrelator {
    fn new(min_size: usize) -> Self {
        let size = min_size.next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            buf: vec![Complex::default(); size],
        }
    }

    /// Writes `r[0..out.len()]` of `x`, unnormalized.
    fn run(&mut self, x: &[f64], out: &mut [f64]) {
        for (slot, i) in self.buf.iter_mut().zip(0..) {
            *slot = Complex::new(x.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.forward.process(&mut self.buf);
        for c in &mut self.buf {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut self.buf);
        let scale = 1.0 / self.size as f64;
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.re * scale;
        }
    }
}

/// F0 per frame from the normalized autocorrelation of a Hann-windowed frame,
/// corrected by the window's own autocorrelation, with parabolic refinement of
/// the lag peak. Unvoiced frames are marked invalid and hold 0.0.
pub fn extract_f0(audio: &AudioBuffer, cfg: &PitchConfig) -> Result<FrameTrack> {
    cfg.validate()?;
    let fr = framing(audio, cfg.frame_shift_s, cfg.window_s)?;
    let sr = audio.sample_rate as f64;
    let min_lag = ((sr / cfg.f0_max).floor() as usize).max(2);
    let max_lag = ((sr / cfg.f0_min).ceil() as usize).min(fr.len - 2);
    if min_lag + 1 >= max_lag {
        return Err(Error::invalid("pitch range does not fit the analysis window"));
    }

    let window = hann(fr.len);
    let wsum: f64 = window.iter().sum();
    let mut ac = Autocorrelator::new(fr.len + max_lag + 2);
    let mut r_win = vec![0.0; max_lag + 2];
    ac.run(&window, &mut r_win);
    let w0 = r_win[0];
    r_win.iter_mut().for_each(|v| *v /= w0);

    let mut seg = vec![0.0; fr.len];
    let mut r = vec![0.0; max_lag + 2];
    let mut values = Vec::with_capacity(fr.starts.len());
    let mut valid = Vec::with_capacity(fr.starts.len());
    for &start in &fr.starts {
        let raw = &audio.samples[start..start + fr.len];
        let rms = weighted_rms(raw, &window, wsum);
        let mean = raw.iter().sum::<f64>() / fr.len as f64;
        for ((s, x), w) in seg.iter_mut().zip(raw).zip(&window) {
            *s = (x - mean) * w;
        }
        ac.run(&seg, &mut r);
        let r0 = r[0];
        let best = if rms >= SILENCE_RMS && r0 > 0.0 {
            for (v, w) in r.iter_mut().zip(&r_win) {
                *v = *v / r0 / w;
            }
            best_lag(&r, min_lag, max_lag, cfg.f0_min / sr)
        } else {
            None
        };
        match best {
            Some((lag, peak)) if peak >= cfg.voicing_threshold => {
                values.push((sr / lag).clamp(cfg.f0_min, cfg.f0_max));
                valid.push(true);
            }
            _ => {
                values.push(0.0);
                valid.push(false);
            }
        }
    }
    Ok(FrameTrack {
        values,
        valid,
        frame_shift_s: cfg.frame_shift_s,
        start_s: 0.0,
    })
}

/// Best (refined lag, interpolated peak) among local maxima of `r` in
/// `[min_lag, max_lag]`, ranked by peak height minus the octave cost.
fn best_lag(r: &[f64], min_lag: usize, max_lag: usize, min_f0_per_sample: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for lag in min_lag..=max_lag {
        let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
        if !(b > a && b >= c) {
            continue;
        }
        let denom = a - 2.0 * b + c;
        let (shift, peak) = if denom < 0.0 {
            let d = 0.5 * (a - c) / denom;
            (d, b - 0.25 * (a - c) * d)
        } else {
            (0.0, b)
        };
        let tau = lag as f64 + shift;
        let score = peak - OCTAVE_COST * (min_f0_per_sample * tau).log2();
        if best.is_none_or(|(_, _, s)| score > s) {
            best = Some((tau, peak, score));
        }
    }
    best.map(|(tau, peak, _)| (tau, peak))
}

/// Piecewise-constant log word duration; frames outside word spans are invalid.
pub fn duration_track(utterance: &Utterance, frame_shift_s: f64, total_duration_s: f64) -> Result<FrameTrack> {
    if !(frame_shift_s > 0.0) {
        return Err(Error::invalid("frame shift must be positive"));
    }
    let n = frame_count(total_duration_s, frame_shift_s);
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    for tok in &utterance.tokens {
        if tok.end_s > total_duration_s + 1e-6 || tok.start_s < 0.0 {
            return Err(Error::SpanOutsideAudio(format!(
                "utterance {}: token {:?} spans {}..{} s but audio lasts {:.3} s",
                utterance.id, tok.text, tok.start_s, tok.end_s, total_duration_s
            )));
        }
        if tok.is_punct {
            continue;
        }
        let value = (tok.end_s - tok.start_s).ln();
        let first = (tok.start_s / frame_shift_s - 1e-9).ceil().max(0.0) as usize;
        for i in first..n {
            if i as f64 * frame_shift_s >= tok.end_s - 1e-12 {
                break;
            }
            values[i] = value;
            valid[i] = true;
        }
    }
    Ok(FrameTrack {
        values,
        valid,
        frame_shift_s,
        start_s: 0.0,
    })
}
