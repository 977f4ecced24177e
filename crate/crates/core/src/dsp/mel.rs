use super::fft::Fft;
use super::frame::{frame_count, hann_periodic};
use super::norm::NormStats;
use super::{FrameConfig, LOG_FLOOR_POWER};
use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK Mel scale, stored as an `n_mels x n_bins` matrix.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FrameConfig) -> Self {
        let n_bins = cfg.n_bins();
        let nyquist = cfg.sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
        let mut weights = vec![0.0; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (center - lo);
                let falling = (hi - f) / (hi - center);
                weights[m * n_bins + k] = rising.min(falling).max(0.0);
            }
        }
        MelFilterbank {
            n_mels: cfg.n_mels,
            n_bins,
            weights,
            centers_hz: edges[1..=cfg.n_mels].to_vec(),
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Filter energies for a one-sided power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Cached window, FFT plan and filterbank for one [`FrameConfig`].
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FrameConfig,
    window: Vec<f64>,
    fft: Fft,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FeatureExtractor {
            cfg: *cfg,
            window: hann_periodic(cfg.frame_len),
            fft: Fft::new(cfg.fft_size),
            filterbank: MelFilterbank::new(cfg),
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Hann-windowed, zero-padded power spectrum of one frame.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        debug_assert_eq!(frame.len(), self.cfg.frame_len);
        let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(x, w)| x * w).collect();
        self.fft.power_spectrum(&windowed)
    }

    /// Log-Mel feature vector of one frame.
    pub fn frame_log_mel(&self, frame: &[f64]) -> Vec<f64> {
        self.filterbank
            .apply(&self.power_spectrum(frame))
            .into_iter()
            .map(|e| e.max(LOG_FLOOR_POWER).ln())
            .collect()
    }

    pub fn log_mel(&self, samples: &[f64]) -> Result<MelSpectrogram> {
        let n = frame_count(samples.len(), &self.cfg);
        if n == 0 {
            return Err(Error::Data(format!(
                "signal of {} samples is shorter than one frame ({})",
                samples.len(),
                self.cfg.frame_len
            )));
        }
        let mut data = Vec::with_capacity(n * self.cfg.n_mels);
        for i in 0..n {
            let start = i * self.cfg.hop;
            data.extend(self.frame_log_mel(&samples[start..start + self.cfg.frame_len]));
        }
        MelSpectrogram::new(data, self.cfg)
    }
}

/// Row-major `frames x n_mels` log-Mel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f64>,
    config: FrameConfig,
    norm: Option<NormStats>,
}

impl MelSpectrogram {
    pub fn new(data: Vec<f64>, config: FrameConfig) -> Result<Self> {
        if config.n_mels == 0 || data.len() % config.n_mels != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of {} bands",
                data.len(),
                config.n_mels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("mel_spectrogram", "non-finite entry"));
        }
        Ok(MelSpectrogram {
            data,
            config,
            norm: None,
        })
    }

    /// Builds a spectrogram from explicit rows.
    pub fn from_rows(rows: &[Vec<f64>], config: FrameConfig) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != config.n_mels) {
            return Err(Error::Shape(format!(
                "row of {} bands, expected {}",
                r.len(),
                config.n_mels
            )));
        }
        Self::new(rows.concat(), config)
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.config.n_mels
    }

    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.config.n_mels..(i + 1) * self.config.n_mels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.config.n_mels)
    }

    pub fn norm(&self) -> Option<&NormStats> {
        self.norm.as_ref()
    }

    /// Standardises every band with `stats` and attaches them.
    pub fn normalize(&self, stats: &NormStats) -> Result<MelSpectrogram> {
        if self.norm.is_some() {
            return Err(Error::State("spectrogram is already normalized".into()));
        }
        stats.check_dim(self.n_mels())?;
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.config.n_mels) {
            stats.normalize_in_place(row);
        }
        Ok(MelSpectrogram {
            data,
            config: self.config,
            norm: Some(stats.clone()),
        })
    }

    /// Undoes [`normalize`](Self::normalize) using the attached statistics.
    pub fn denormalize(&self) -> Result<MelSpectrogram> {
        let stats = self
            .norm
            .as_ref()
            .ok_or_else(|| Error::State("no normalization statistics attached".into()))?;
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.config.n_mels) {
            stats.denormalize_in_place(row);
        }
        Ok(MelSpectrogram {
            data,
            config: self.config,
            norm: None,
        })
    }
}

/// Log-Mel spectrogram of `audio`, one row per complete frame.
pub fn mel_spectrogram(samples: &[f64], cfg: &FrameConfig) -> Result<MelSpectrogram> {
    FeatureExtractor::new(cfg)?.log_mel(samples)
}
