//! Conditional normalizing-flow vocoder.
//!
//! An invertible map between grouped audio and a Gaussian latent of the same
//! size, conditioned on log-Mel frames. Each of the `n_flows` steps is an
//! affine coupling whose scale and shift come from a dilated-convolution
//! conditioner, followed by an invertible 1x1 mix of the group channels.
//! Training maximizes exact likelihood; synthesis samples the latent and
//! runs the map backwards.

mod flow;
mod train;
mod wn;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{AudioBuffer, FrameConfig, NormStats};
use crate::error::{Error, Result};
use crate::nn::linalg::{random_orthogonal, Lu};
use crate::nn::{checkpoint, ParamSet, Tensor};

pub use flow::{inv_conv_forward, inv_conv_inverse, mix, squeeze, unsqueeze, MIN_SCALE};
pub use train::{extract_segments, identity_nll, train_vocoder, Segment, SegmentStats, VocoderTrainConfig};

use flow::w_name;
use wn::WnNames;

/// Inference latent standard deviation used when none is given.
pub const DEFAULT_SIGMA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub n_flows: usize,
    /// Samples per grouped time step.
    pub group: usize,
    pub wn_layers: usize,
    pub wn_channels: usize,
    pub kernel_size: usize,
    pub n_mels: usize,
    /// Mel hop in samples, used to align frames with grouped steps.
    pub hop: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            n_flows: 10,
            group: 8,
            wn_layers: 4,
            wn_channels: 64,
            kernel_size: 3,
            n_mels: 80,
            hop: 160,
        }
    }
}

impl FlowConfig {
    /// Reduced shapes for quick CPU runs.
    pub fn desk() -> Self {
        FlowConfig {
            n_flows: 4,
            wn_layers: 3,
            wn_channels: 16,
            n_mels: 40,
            ..FlowConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_flows == 0 || self.wn_layers == 0 || self.wn_channels == 0 || self.n_mels == 0 || self.hop == 0 {
            return Err(Error::Parameter(format!("degenerate flow config {self:?}")));
        }
        if self.group < 2 || self.group % 2 != 0 {
            return Err(Error::Parameter(format!("group must be even and at least 2, got {}", self.group)));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Parameter(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    /// Grouped steps needed to hold `n_samples`.
    pub fn steps_for(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.group)
    }

    fn to_vec(self) -> Vec<f64> {
        [
            self.group,
            self.n_flows,
            self.wn_layers,
            self.wn_channels,
            self.kernel_size,
            self.n_mels,
            self.hop,
        ]
        .iter()
        .map(|&v| v as f64)
        .collect()
    }

    fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 7 || v.iter().any(|x| !(x.fract() == 0.0 && *x >= 0.0)) {
            return Err(Error::Format(format!("vocoder.config must hold 7 non-negative integers, got {v:?}")));
        }
        let cfg = FlowConfig {
            group: v[0] as usize,
            n_flows: v[1] as usize,
            wn_layers: v[2] as usize,
            wn_channels: v[3] as usize,
            kernel_size: v[4] as usize,
            n_mels: v[5] as usize,
            hop: v[6] as usize,
        };
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }
}

/// `P + 2` log-Mel frames (history plus predicted) and the waveform length
/// they span.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningWindow {
    pub mel: Vec<Vec<f64>>,
    pub target_len: usize,
    pub sample_rate: u32,
}

impl ConditioningWindow {
    pub fn new(mel: Vec<Vec<f64>>, history: usize, frames: &FrameConfig) -> Result<Self> {
        if mel.len() != history + 2 {
            return Err(Error::Shape(format!(
                "conditioning needs {} frames, got {}",
                history + 2,
                mel.len()
            )));
        }
        if let Some(r) = mel.iter().find(|r| r.len() != frames.n_mels) {
            return Err(Error::Shape(format!("Mel row of {} bands, expected {}", r.len(), frames.n_mels)));
        }
        Ok(ConditioningWindow {
            target_len: frames.span(mel.len()),
            mel,
            sample_rate: frames.sample_rate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    config: FlowConfig,
    pub(crate) params: ParamSet,
    norm: NormStats,
}

impl FlowModel {
    /// Random orthogonal mixes and identity couplings.
    pub fn new(config: FlowConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let g = config.group;
        for k in 0..config.n_flows {
            params.insert(w_name(k), Tensor::from_vec(&[g, g], random_orthogonal(g, &mut rng))?)?;
            WnNames::new(k, config.wn_layers).init(&config, &mut params, &mut rng)?;
        }
        Ok(FlowModel {
            norm: NormStats::identity(config.n_mels),
            config,
            params,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Statistics applied to raw log-Mel frames before conditioning.
    pub fn norm(&self) -> &NormStats {
        &self.norm
    }

    pub fn set_norm(&mut self, norm: NormStats) -> Result<()> {
        norm.check_dim(self.config.n_mels)?;
        self.norm = norm;
        Ok(())
    }

    /// Fails if any mixing matrix is singular.
    pub fn check_invertible(&self) -> Result<()> {
        for k in 0..self.config.n_flows {
            let lu = Lu::new(self.params.value(&w_name(k))?.data(), self.config.group)?;
            if lu.is_singular() || !lu.log_abs_det().is_finite() {
                return Err(Error::numeric("check_invertible", format!("flow {k} mixing matrix is singular")));
            }
        }
        Ok(())
    }

    /// Conditioning for a batch of raw log-Mel windows, each covering
    /// `n_samples` samples that start at its first frame. Every frame is
    /// held over its hop span; the final frame also covers the tail.
    pub fn condition(&self, windows: &[&[Vec<f64>]], n_samples: usize) -> Result<Tensor> {
        let (f, g, hop) = (self.config.n_mels, self.config.group, self.config.hop);
        let steps = self.config.steps_for(n_samples);
        let mut out = Tensor::zeros(&[windows.len(), f, steps]);
        for (b, rows) in windows.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::Shape("conditioning window has no frames".into()));
            }
            let mut normed = Vec::with_capacity(rows.len());
            for r in rows.iter() {
                if r.len() != f {
                    return Err(Error::Shape(format!("Mel row of {} bands, expected {f}", r.len())));
                }
                let mut r = r.clone();
                self.norm.normalize_in_place(&mut r);
                normed.push(r);
            }
            for t in 0..steps {
                let frame = (t * g / hop).min(rows.len() - 1);
                for (m, &v) in normed[frame].iter().enumerate() {
                    out.lane_mut(b, m)[t] = v;
                }
            }
        }
        Ok(out)
    }

    /// Maps grouped audio to the latent. Returns `z` and the total
    /// log-determinant summed over the batch.
    pub fn flow_forward(&self, x: &Tensor, cond: &Tensor) -> Result<(Tensor, f64)> {
        self.check_io(x, cond)?;
        let (z, logdet, _) = flow::flow_forward(&self.config, &self.params, x, cond)?;
        Ok((z, logdet))
    }

    pub fn flow_inverse(&self, z: &Tensor, cond: &Tensor) -> Result<Tensor> {
        self.check_io(z, cond)?;
        flow::flow_inverse(&self.config, &self.params, z, cond)
    }

    /// Coupling of a single flow step; exposed for inspection and tests.
    pub fn coupling_forward(&self, flow: usize, x: &Tensor, cond: &Tensor) -> Result<(Tensor, f64)> {
        self.check_flow(flow)?;
        self.check_io(x, cond)?;
        let (y, ld, _) = flow::coupling_forward(&self.config, &self.params, flow, x, cond)?;
        Ok((y, ld))
    }

    pub fn coupling_inverse(&self, flow: usize, y: &Tensor, cond: &Tensor) -> Result<Tensor> {
        self.check_flow(flow)?;
        self.check_io(y, cond)?;
        flow::coupling_inverse(&self.config, &self.params, flow, y, cond)
    }

    /// Per-sample negative log-likelihood with latent deviation `sigma`.
    pub fn nll(&self, x: &Tensor, cond: &Tensor, sigma: f64) -> Result<f64> {
        let (z, logdet) = self.flow_forward(x, cond)?;
        let (loss, _, _) = flow::gaussian_nll(&z, logdet, sigma);
        finite("nll", loss)
    }

    /// Like [`FlowModel::nll`], also accumulating parameter gradients.
    pub fn nll_and_grad(&mut self, x: &Tensor, cond: &Tensor, sigma: f64) -> Result<f64> {
        self.check_io(x, cond)?;
        let (z, logdet, cache) = flow::flow_forward(&self.config, &self.params, x, cond)?;
        let (loss, dz, dlogdet) = flow::gaussian_nll(&z, logdet, sigma);
        finite("nll", loss)?;
        flow::flow_backward(&self.config, &mut self.params, &cache, &dz, dlogdet)?;
        Ok(loss)
    }

    fn check_flow(&self, flow: usize) -> Result<()> {
        if flow >= self.config.n_flows {
            return Err(Error::Parameter(format!("flow {flow} out of {}", self.config.n_flows)));
        }
        Ok(())
    }

    fn check_io(&self, x: &Tensor, cond: &Tensor) -> Result<()> {
        let c = &self.config;
        if x.shape().len() != 3 || x.dim(1) != c.group {
            return Err(Error::Shape(format!("expected [batch, {}, time], got {:?}", c.group, x.shape())));
        }
        cond.expect_shape(&[x.dim(0), c.n_mels, x.dim(2)], "conditioning")
    }

    fn known_names(&self) -> Vec<String> {
        let mut names = vec![
            "vocoder.config".to_string(),
            "vocoder.norm.mean".to_string(),
            "vocoder.norm.std".to_string(),
        ];
        names.extend(self.params.names().map(String::from));
        names
    }

    pub fn to_param_set(&self) -> Result<ParamSet> {
        let mut set = self.params.clone();
        let f = self.config.n_mels;
        set.insert("vocoder.config", Tensor::from_vec(&[7], self.config.to_vec())?)?;
        set.insert("vocoder.norm.mean", Tensor::from_vec(&[f], self.norm.mean.clone())?)?;
        set.insert("vocoder.norm.std", Tensor::from_vec(&[f], self.norm.std.clone())?)?;
        Ok(set)
    }

    /// Rebuilds a model from checkpoint tensors; unknown names come back as
    /// warnings.
    pub fn from_param_set(set: &ParamSet) -> Result<(Self, Vec<String>)> {
        let config = FlowConfig::from_slice(set.value("vocoder.config")?.data())?;
        let mut model = FlowModel::new(config, 0)?;
        let expected: Vec<(String, Vec<usize>)> = model
            .params
            .iter()
            .map(|(n, p)| (n.to_string(), p.value.shape().to_vec()))
            .collect();
        for (name, shape) in expected {
            let v = set.value(&name)?;
            v.expect_shape(&shape, &name).map_err(|e| Error::Format(e.to_string()))?;
            *model.params.value_mut(&name)? = v.clone();
        }
        let norm = NormStats {
            mean: set.value("vocoder.norm.mean")?.data().to_vec(),
            std: set.value("vocoder.norm.std")?.data().to_vec(),
        };
        model.set_norm(norm).map_err(|e| Error::Format(e.to_string()))?;
        model.check_invertible()?;
        let warnings = checkpoint::unknown_names(set, &model.known_names())
            .into_iter()
            .map(|n| format!("ignoring unknown tensor {n:?}"))
            .collect();
        Ok((model, warnings))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(&self.to_param_set()?, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        Self::from_param_set(&checkpoint::load(path)?)
    }
}

fn finite(op: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(op, format!("non-finite value {v}")))
    }
}

/// Draws a latent of `target_len` samples from `N(0, sigma^2)` and inverts
/// the flow under the window's conditioning.
pub fn infer_waveform(cond: &ConditioningWindow, model: &FlowModel, sigma: f64, seed: u64) -> Result<AudioBuffer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    let cfg = model.config();
    let steps = cfg.steps_for(cond.target_len);
    let mut z = Tensor::zeros(&[1, cfg.group, steps]);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in z.data_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    let c = model.condition(&[&cond.mel], cond.target_len)?;
    let x = model.flow_inverse(&z, &c)?;
    let pad = steps * cfg.group - cond.target_len;
    let mut out = unsqueeze(&x, pad)?;
    AudioBuffer::new(out.remove(0), cond.sample_rate)
}
