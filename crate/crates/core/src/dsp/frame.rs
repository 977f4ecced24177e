use std::f64::consts::PI;

use super::FrameConfig;
use crate::error::{Error, Result};

/// Periodic Hann window of length `n`.
///
/// At a hop of `n / 2` the shifted copies sum to exactly one.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of complete frames that fit in `len` samples.
pub fn frame_count(len: usize, cfg: &FrameConfig) -> usize {
    if len < cfg.frame_len {
        0
    } else {
        (len - cfg.frame_len) / cfg.hop + 1
    }
}

/// Splits a signal into overlapping, unwindowed frames; frame `i` starts at `i * hop`.
/// A trailing partial frame is dropped.
pub fn frame_signal(samples: &[f64], cfg: &FrameConfig) -> Result<Vec<Vec<f64>>> {
    if samples.len() < cfg.frame_len {
        return Err(Error::Data(format!(
            "signal of {} samples is shorter than one frame ({})",
            samples.len(),
            cfg.frame_len
        )));
    }
    Ok((0..frame_count(samples.len(), cfg))
        .map(|i| samples[i * cfg.hop..i * cfg.hop + cfg.frame_len].to_vec())
        .collect())
}

/// Applies the synthesis window to each frame and sums them at the hop.
pub fn overlap_add(frames: &[Vec<f64>], cfg: &FrameConfig) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::Data("overlap_add needs at least one frame".into()));
    }
    if cfg.frame_len != 2 * cfg.hop {
        return Err(Error::Parameter("overlap_add requires frame_len = 2 * hop".into()));
    }
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != cfg.frame_len) {
        return Err(Error::Shape(format!(
            "frame {i} has {} samples, expected {}",
            f.len(),
            cfg.frame_len
        )));
    }
    let window = hann_periodic(cfg.frame_len);
    let mut out = vec![0.0; cfg.span(frames.len())];
    for (i, frame) in frames.iter().enumerate() {
        let dst = &mut out[i * cfg.hop..i * cfg.hop + cfg.frame_len];
        for ((o, &x), &w) in dst.iter_mut().zip(frame).zip(&window) {
            *o += w * x;
        }
    }
    Ok(out)
}
