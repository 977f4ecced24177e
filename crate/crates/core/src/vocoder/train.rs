use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flow, squeeze, FlowConfig, FlowModel};
use crate::dsp::{AudioBuffer, FeatureExtractor, FrameConfig, MelSpectrogram, NormStats};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::predictor::TrainLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocoderTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Mel frames per training segment; the audio spans `span(segment_frames)`.
    pub segment_frames: usize,
    pub lr: f64,
    /// Latent deviation assumed by the training likelihood.
    pub sigma: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    /// Save to `checkpoint_path` every this many steps; 0 disables.
    pub checkpoint_every: usize,
    #[serde(skip)]
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for VocoderTrainConfig {
    fn default() -> Self {
        VocoderTrainConfig {
            steps: 2000,
            batch_size: 4,
            segment_frames: 13,
            lr: 5e-4,
            sigma: 1.0,
            clip_norm: 10.0,
            checkpoint_every: 0,
            checkpoint_path: None,
        }
    }
}

/// Aligned audio and log-Mel frames; frame `i` starts at sample `i * hop`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub audio: Vec<f64>,
    pub mel: Vec<Vec<f64>>,
}

struct Clip {
    samples: Vec<f64>,
    mel: MelSpectrogram,
}

impl Clip {
    fn segment(&self, start: usize, n_frames: usize, frames: &FrameConfig) -> Segment {
        let s = start * frames.hop;
        Segment {
            audio: self.samples[s..s + frames.span(n_frames)].to_vec(),
            mel: (start..start + n_frames).map(|j| self.mel.row(j).to_vec()).collect(),
        }
    }
}

fn analyse(corpus: &[AudioBuffer], frames: &FrameConfig) -> Result<Vec<Clip>> {
    let fx = FeatureExtractor::new(frames)?;
    corpus
        .iter()
        .filter(|a| a.len() >= frames.frame_len)
        .map(|a| {
            Ok(Clip {
                samples: a.samples.clone(),
                mel: fx.log_mel(&a.samples)?,
            })
        })
        .collect()
}

/// Non-overlapping segments of `n_frames` frames from every clip.
pub fn extract_segments(corpus: &[AudioBuffer], frames: &FrameConfig, n_frames: usize) -> Result<Vec<Segment>> {
    if n_frames == 0 {
        return Err(Error::Parameter("segments need at least one frame".into()));
    }
    let mut out = Vec::new();
    for clip in analyse(corpus, frames)? {
        let mut j = 0;
        while j + n_frames <= clip.mel.n_frames() {
            out.push(clip.segment(j, n_frames, frames));
            j += n_frames;
        }
    }
    Ok(out)
}

/// NLL of the untrained identity map: `mean(x^2)/(2 sigma^2) + log(2 pi sigma^2)/2`.
pub fn identity_nll(segments: &[Segment], sigma: f64) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for s in segments {
        sq += s.audio.iter().map(|v| v * v).sum::<f64>();
        n += s.audio.len();
    }
    sq / (2.0 * sigma * sigma * n.max(1) as f64) + 0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

/// Mean NLL and latent variance over a set of equally long segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub nll: f64,
    pub identity_nll: f64,
    pub latent_variance: f64,
}

impl FlowModel {
    fn batch(&self, segments: &[&Segment]) -> Result<(Tensor, Tensor)> {
        let audio: Vec<&[f64]> = segments.iter().map(|s| s.audio.as_slice()).collect();
        let (x, _) = squeeze(&audio, self.config().group)?;
        let mel: Vec<&[Vec<f64>]> = segments.iter().map(|s| s.mel.as_slice()).collect();
        let cond = self.condition(&mel, audio.first().map_or(0, |a| a.len()))?;
        Ok((x, cond))
    }

    pub fn evaluate(&self, segments: &[Segment], sigma: f64) -> Result<SegmentStats> {
        if segments.is_empty() {
            return Err(Error::Data("no segments to evaluate".into()));
        }
        let (mut nll, mut sq, mut count) = (0.0, 0.0, 0usize);
        for chunk in segments.chunks(8) {
            let refs: Vec<&Segment> = chunk.iter().collect();
            let (x, cond) = self.batch(&refs)?;
            let (z, logdet) = self.flow_forward(&x, &cond)?;
            let (loss, _, _) = flow::gaussian_nll(&z, logdet, sigma);
            nll += loss * z.len() as f64;
            sq += z.data().iter().map(|v| v * v).sum::<f64>();
            count += z.len();
        }
        let n = count as f64;
        Ok(SegmentStats {
            nll: nll / n,
            identity_nll: identity_nll(segments, sigma),
            latent_variance: sq / n,
        })
    }
}

/// Trains a fresh model on random fixed-length segments of the corpus.
/// Normalization statistics are fitted over every frame first.
pub fn train_vocoder(
    corpus: &[AudioBuffer],
    frames: &FrameConfig,
    arch: FlowConfig,
    cfg: &VocoderTrainConfig,
    seed: u64,
) -> Result<(FlowModel, TrainLog)> {
    if arch.n_mels != frames.n_mels || arch.hop != frames.hop {
        return Err(Error::Parameter(format!(
            "vocoder expects {} bands at hop {}, features have {} at hop {}",
            arch.n_mels, arch.hop, frames.n_mels, frames.hop
        )));
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(cfg.sigma > 0.0) || cfg.segment_frames == 0 {
        return Err(Error::Parameter("batch_size, lr, sigma and segment_frames must be positive".into()));
    }
    let clips = analyse(corpus, frames)?;
    let starts: Vec<(usize, usize)> = clips
        .iter()
        .enumerate()
        .flat_map(|(c, clip)| {
            let n = clip.mel.n_frames();
            let last = (n + 1).saturating_sub(cfg.segment_frames);
            (0..last).map(move |j| (c, j))
        })
        .collect();
    if starts.is_empty() {
        return Err(Error::Data(format!(
            "no clip holds one training segment of {} samples",
            frames.span(cfg.segment_frames)
        )));
    }
    let stats = NormStats::fit(clips.iter().flat_map(|c| c.mel.rows()))?;
    let mut model = FlowModel::new(arch, seed)?;
    model.set_norm(stats)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut log = TrainLog::default();
    for step in 1..=cfg.steps {
        let batch: Vec<_> = (0..cfg.batch_size)
            .map(|_| {
                let (c, j) = starts[rng.random_range(0..starts.len())];
                clips[c].segment(j, cfg.segment_frames, frames)
            })
            .collect();
        let refs: Vec<&Segment> = batch.iter().collect();
        let (x, cond) = model.batch(&refs)?;
        model.params.zero_grad();
        let loss = model.nll_and_grad(&x, &cond, cfg.sigma)?;
        if cfg.clip_norm > 0.0 {
            model.params.clip_grad_norm(cfg.clip_norm);
        }
        let before = model.params.clone();
        opt.step(&mut model.params, step as u64)?;
        if let Err(e) = model.check_invertible() {
            log::warn!("step {step}: {e}; update discarded");
            model.params = before;
        }
        log.losses.push(loss);
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            if let Some(path) = &cfg.checkpoint_path {
                model.save(path)?;
            }
        }
    }
    Ok((model, log))
}
