use std::io::Cursor;

use hound::{SampleFormat, WavReader};

use super::AudioBuffer;
use crate::{Error, Result};

/// Decodes a RIFF/WAVE byte stream holding 16-bit PCM mono audio.
///
/// Samples are divided by 32768, so the result always lies in `[-1, 1)`.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!(
            "channel count {} (mono only)",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int {
        return Err(Error::UnsupportedAudio(
            "encoding: floating-point samples (PCM only)".into(),
        ));
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!(
            "bit depth {} (16-bit only)",
            spec.bits_per_sample
        )));
    }
    if spec.sample_rate == 0 {
        return Err(Error::Wav("sample rate 0".into()));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Wav(e.to_string()))?;
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}
