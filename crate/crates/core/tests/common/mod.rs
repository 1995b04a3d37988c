//! Synthetic speech fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use prosolab::corpus_io::{AudioBuffer, Token, Utterance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SR: u32 = 16_000;

/// One synthetic word: a voiced harmonic tone with a flat pitch.
#[derive(Debug, Clone, Copy)]
pub struct WordSpec {
    pub dur_s: f64,
    pub f0_hz: f64,
    pub amp: f64,
}

impl WordSpec {
    pub const PLAIN: WordSpec = WordSpec {
        dur_s: 0.25,
        f0_hz: 120.0,
        amp: 0.2,
    };
}

pub const GAP_S: f64 = 0.04;

/// Words separated by short silences, with a 0.1 s silent lead-in and tail.
/// Each word fades in and out over 15 ms.
pub fn synth(words: &[WordSpec]) -> (AudioBuffer, Utterance) {
    let sr = SR as f64;
    let lead = 0.1;
    let mut samples = vec![0.0; (lead * sr) as usize];
    let mut tokens = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let start = samples.len();
        let n = (w.dur_s * sr).round() as usize;
        let ramp = (0.015 * sr) as usize;
        let mut phase = 0.0;
        for k in 0..n {
            let env = if k < ramp {
                0.5 - 0.5 * (PI * k as f64 / ramp as f64).cos()
            } else if k + ramp > n {
                0.5 - 0.5 * (PI * (n - k) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            phase += 2.0 * PI * w.f0_hz / sr;
            let tone = phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin();
            samples.push(w.amp * env * tone / 1.75);
        }
        tokens.push(Token::new(
            format!("w{i}"),
            start as f64 / sr,
            (start + n) as f64 / sr,
        ));
        let gap = if i + 1 < words.len() { GAP_S } else { lead };
        samples.extend(std::iter::repeat_n(0.0, (gap * sr) as usize));
    }
    let utt = Utterance::new("synthetic", "synthetic", tokens).expect("words present");
    (AudioBuffer::new(samples, SR), utt)
}

/// Five plain words with the middle one louder, longer and higher.
pub fn five_word_fixture() -> (AudioBuffer, Utterance) {
    let mut words = [WordSpec::PLAIN; 5];
    words[2] = WordSpec {
        dur_s: 0.4,
        f0_hz: 170.0,
        amp: 0.45,
    };
    synth(&words)
}

/// Six words whose salience grows with a random level in 0..6 on all three
/// cues at once. Returns the fixture and the levels.
pub fn random_fixture(seed: u64) -> (AudioBuffer, Utterance, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels: Vec<f64> = (0..6).map(|i| i as f64).collect();
    for i in (1..levels.len()).rev() {
        let j = rng.random_range(0..=i);
        levels.swap(i, j);
    }
    let words: Vec<WordSpec> = levels
        .iter()
        .map(|&l| WordSpec {
            dur_s: 0.2 + 0.04 * l,
            f0_hz: 110.0 + 12.0 * l,
            amp: 0.1 + 0.06 * l,
        })
        .collect();
    let (audio, utt) = synth(&words);
    (audio, utt, levels)
}

/// A pure sinusoid.
pub fn sine(freq: f64, amp: f64, dur_s: f64) -> AudioBuffer {
    let n = (dur_s * SR as f64) as usize;
    let samples = (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / SR as f64).sin())
        .collect();
    AudioBuffer::new(samples, SR)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
