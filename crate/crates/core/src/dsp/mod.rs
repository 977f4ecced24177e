//! Signal-processing front end.
//!
//! Conventions used everywhere in the crate:
//!
//! - periodic Hann window, applied once before the FFT for analysis and once
//!   during overlap-add for synthesis; at 50% overlap the synthesis path sums
//!   to one, so framing followed by overlap-add is the identity;
//! - HTK Mel scale, `mel = 2595 * log10(1 + f / 700)`, with `n_mels`
//!   triangular filters whose edges are equally spaced in mel between 0 Hz
//!   and Nyquist;
//! - features are the natural log of the filterbank output applied to the
//!   *power* spectrum, floored at [`LOG_FLOOR_POWER`].

mod fft;
mod frame;
mod mel;
mod norm;
pub mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fft::{dft_naive, Fft};
pub use frame::{frame_count, frame_signal, hann_periodic, overlap_add};
pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, FeatureExtractor, MelFilterbank, MelSpectrogram};
pub use norm::{NormStats, STD_FLOOR};

/// Power floor applied before taking logarithms.
pub const LOG_FLOOR_POWER: f64 = 1e-10;

/// Framing and feature geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Frame length `W` in samples.
    pub frame_len: usize,
    /// Hop `H` in samples.
    pub hop: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub sample_rate: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            frame_len: 320,
            hop: 160,
            fft_size: 512,
            n_mels: 80,
            sample_rate: 16_000,
        }
    }
}

impl FrameConfig {
    /// Same framing as the default with a 40-band filterbank.
    pub fn desk() -> Self {
        FrameConfig {
            n_mels: 40,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.frame_len || self.frame_len > self.fft_size {
            return Err(Error::Parameter(format!(
                "need 0 < hop ({}) <= frame_len ({}) <= fft_size ({})",
                self.hop, self.frame_len, self.fft_size
            )));
        }
        if self.frame_len != 2 * self.hop {
            return Err(Error::Parameter(format!(
                "frame_len ({}) must be twice the hop ({}) for 50% overlap",
                self.frame_len, self.hop
            )));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.n_mels == 0 || self.sample_rate == 0 {
            return Err(Error::Parameter("n_mels and sample_rate must be positive".into()));
        }
        Ok(())
    }

    /// Number of one-sided FFT bins.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Samples spanned by `n` consecutive frames.
    pub fn span(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.hop + self.frame_len
        }
    }
}

/// Mono audio at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::numeric("audio", format!("non-finite sample at index {i}")));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
