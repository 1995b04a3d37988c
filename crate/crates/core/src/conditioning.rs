//! Gap filling, Gaussian smoothing, and per-utterance z-normalization.
//! The pipeline order is always interpolate → smooth → normalize.

use crate::acoustics::FrameTrack;
use crate::{Error, Result};

/// Replaces invalid frames: interior gaps by linear interpolation between the
/// flanking valid frames, leading and trailing gaps by the nearest valid value.
pub fn interpolate_gaps(track: &FrameTrack) -> Result<FrameTrack> {
    let valid_idx: Vec<usize> = (0..track.len()).filter(|&i| track.valid[i]).collect();
    let (Some(&first), Some(&last)) = (valid_idx.first(), valid_idx.last()) else {
        return Err(Error::invalid("track has no valid frames to interpolate from"));
    };
    let mut values = track.values.clone();
    values[..first].fill(track.values[first]);
    values[last + 1..].fill(track.values[last]);
    for pair in valid_idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (va, vb) = (track.values[a], track.values[b]);
        let span = (b - a) as f64;
        for (i, v) in values.iter_mut().enumerate().take(b).skip(a + 1) {
            let t = (i - a) as f64 / span;
            *v = va + (vb - va) * t;
        }
    }
    Ok(FrameTrack {
        valid: vec![true; values.len()],
        values,
        frame_shift_s: track.frame_shift_s,
        start_s: track.start_s,
    })
}

/// Maps any integer index onto `[0, n)` by whole-sample mirror reflection
/// (`... c b | a b c d | c b ...`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Truncated (±3σ), renormalized Gaussian kernel for a standard deviation
/// given in frames. Index `radius` is the centre tap.
pub fn gaussian_kernel(sigma_frames: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_frames - 1e-9).ceil().max(0.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|j| (-0.5 * (j as f64 / sigma_frames).powi(2)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves with a unit-area Gaussian of standard deviation `sigma_s`
/// seconds under reflective boundaries. `sigma_s == 0` is the identity.
pub fn smooth(track: &FrameTrack, sigma_s: f64) -> Result<FrameTrack> {
    if !track.all_valid() {
        return Err(Error::invalid("smoothing requires a fully valid track"));
    }
    if !(sigma_s >= 0.0) {
        return Err(Error::invalid(format!("negative smoothing sigma {sigma_s}")));
    }
    let sigma_frames = sigma_s / track.frame_shift_s;
    if sigma_s == 0.0 || track.is_empty() || sigma_frames < 1e-6 {
        return Ok(track.clone());
    }
    let kernel = gaussian_kernel(sigma_frames);
    let radius = (kernel.len() / 2) as isize;
    let n = track.len();
    let values = (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .zip(-radius..)
                .map(|(k, j)| k * track.values[reflect(i + j, n)])
                .sum()
        })
        .collect();
    Ok(FrameTrack {
        values,
        ..track.clone()
    })
}

/// Result of [`znormalize`]. `degenerate` is set when the input was
/// (numerically) constant and the output was forced to zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub track: FrameTrack,
    pub degenerate: bool,
}

/// Standardizes to zero mean and unit population standard deviation.
pub fn znormalize(track: &FrameTrack) -> Result<Normalized> {
    if !track.all_valid() {
        return Err(Error::invalid("normalization requires a fully valid track"));
    }
    let n = track.len();
    if n < 2 {
        return Err(Error::invalid(format!("cannot normalize a track of length {n}")));
    }
    let mean = track.values.iter().sum::<f64>() / n as f64;
    let var = track.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd < 1e-12 {
        return Ok(Normalized {
            track: FrameTrack {
                values: vec![0.0; n],
                ..track.clone()
            },
            degenerate: true,
        });
    }
    let mut values: Vec<f64> = track.values.iter().map(|v| (v - mean) / sd).collect();
    // second pass removes the rounding left by the first
    let m2 = values.iter().sum::<f64>() / n as f64;
    let sd2 = (values.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / n as f64).sqrt();
    values.iter_mut().for_each(|v| *v = (*v - m2) / sd2);
    Ok(Normalized {
        track: FrameTrack {
            values,
            ..track.clone()
        },
        degenerate: false,
    })
}

/// Runs the full conditioning chain on one stream.
pub fn condition(track: &FrameTrack, sigma_s: f64) -> Result<Normalized> {
    let filled = interpolate_gaps(track)?;
    let smoothed = smooth(&filled, sigma_s)?;
    znormalize(&smoothed)
}
