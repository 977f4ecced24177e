//! Feed-forward Mel predictor.
//!
//! Maps the normalized log-Mel vectors of the previous `P` frames to the two
//! frames that follow: `P*F -> hidden -> hidden -> hidden -> 2*F`, logistic
//! sigmoid on the hidden layers and a linear output. Given a lost packet at
//! frame `T`, the history is frames `T-P .. T-1` and the outputs are the
//! estimates for frames `T` and `T+1`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{MelSpectrogram, NormStats};
use crate::error::{Error, Result};
use crate::nn::{
    checkpoint, dense_backward, dense_forward, mse_loss, sigmoid, sigmoid_backward, uniform_init,
    xavier_limit, Adam, AdamConfig, ParamSet, Tensor,
};

const PREFIX: &str = "predictor";
const N_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// Number of history frames `P`.
    pub history: usize,
    pub n_mels: usize,
    pub hidden: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            history: 11,
            n_mels: 80,
            hidden: 2048,
        }
    }
}

impl PredictorConfig {
    /// Reduced shapes for quick CPU runs.
    pub fn desk() -> Self {
        PredictorConfig {
            history: 5,
            n_mels: 40,
            hidden: 256,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.history * self.n_mels
    }

    pub fn output_dim(&self) -> usize {
        2 * self.n_mels
    }

    /// `(in, out)` of each dense layer.
    pub fn layer_shapes(&self) -> [(usize, usize); N_LAYERS] {
        [
            (self.input_dim(), self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.output_dim()),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.history == 0 || self.n_mels == 0 || self.hidden == 0 {
            return Err(Error::Parameter(format!("degenerate predictor config {self:?}")));
        }
        Ok(())
    }
}

fn weight_name(layer: usize) -> String {
    format!("{PREFIX}.l{}.w", layer + 1)
}

fn bias_name(layer: usize) -> String {
    format!("{PREFIX}.l{}.b", layer + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    config: PredictorConfig,
    params: ParamSet,
    norm: Option<NormStats>,
}

/// Activations saved by a forward pass: input plus the three hidden outputs.
#[derive(Debug)]
pub struct ForwardCache {
    activations: Vec<Tensor>,
}

impl PredictorModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(config: PredictorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (i, &(din, dout)) in config.layer_shapes().iter().enumerate() {
            params.insert(weight_name(i), uniform_init(&[din, dout], xavier_limit(din, dout), &mut rng))?;
            params.insert(bias_name(i), Tensor::zeros(&[dout]))?;
        }
        Ok(PredictorModel {
            config,
            params,
            norm: None,
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn norm(&self) -> Option<&NormStats> {
        self.norm.as_ref()
    }

    pub fn set_norm(&mut self, stats: NormStats) -> Result<()> {
        stats.check_dim(self.config.n_mels)?;
        self.norm = Some(stats);
        Ok(())
    }

    /// Forward pass on a `[batch, P*F]` input, returning `[batch, 2F]`.
    pub fn forward_batch(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        x.expect_shape(&[x.dim(0), self.config.input_dim()], "predictor input")?;
        let mut activations = vec![x.clone()];
        let mut h = x.clone();
        for layer in 0..N_LAYERS {
            let z = dense_forward(
                &h,
                self.params.value(&weight_name(layer))?,
                self.params.value(&bias_name(layer))?,
            )?;
            if layer + 1 == N_LAYERS {
                return Ok((z, ForwardCache { activations }));
            }
            h = sigmoid(&z)?;
            activations.push(h.clone());
        }
        unreachable!("loop returns on the output layer")
    }

    /// Accumulates parameter gradients for an upstream gradient `dout`.
    pub fn backward(&mut self, cache: &ForwardCache, dout: &Tensor) -> Result<Tensor> {
        let mut grad = dout.clone();
        for layer in (0..N_LAYERS).rev() {
            let input = &cache.activations[layer];
            let g = dense_backward(input, self.params.value(&weight_name(layer))?, &grad)?;
            self.params.accumulate(&weight_name(layer), &g.dw)?;
            self.params.accumulate(&bias_name(layer), &g.db)?;
            grad = if layer > 0 { sigmoid_backward(input, &g.dx)? } else { g.dx };
        }
        Ok(grad)
    }

    /// Mean squared error on a batch; gradients are added to the parameters.
    pub fn loss_and_grad(&mut self, x: &Tensor, target: &Tensor) -> Result<f64> {
        let (pred, cache) = self.forward_batch(x)?;
        let (loss, dpred) = mse_loss(&pred, target)?;
        self.backward(&cache, &dpred)?;
        Ok(loss)
    }

    fn flatten_history(&self, history: &[&[f64]]) -> Result<Tensor> {
        let PredictorConfig { history: p, n_mels: f, .. } = self.config;
        if history.len() != p {
            return Err(Error::Shape(format!("expected {p} history frames, got {}", history.len())));
        }
        if let Some(r) = history.iter().find(|r| r.len() != f) {
            return Err(Error::Shape(format!("history frame has {} bands, expected {f}", r.len())));
        }
        Tensor::from_vec(&[1, p * f], history.concat())
    }

    /// Predicts normalized frames `T` and `T+1` from `P` normalized history frames.
    pub fn predict_normalized(&self, history: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.flatten_history(history)?;
        let (y, _) = self.forward_batch(&x)?;
        let f = self.config.n_mels;
        let data = y.into_data();
        Ok((data[..f].to_vec(), data[f..].to_vec()))
    }

    /// Same as [`predict_normalized`](Self::predict_normalized) but in raw
    /// log-Mel units, using the attached statistics on both ends.
    pub fn predict(&self, history: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
        let stats = self
            .norm
            .as_ref()
            .ok_or_else(|| Error::State("predictor has no normalization statistics".into()))?;
        let normed: Vec<Vec<f64>> = history
            .iter()
            .map(|r| {
                let mut v = r.to_vec();
                if v.len() == stats.dim() {
                    stats.normalize_in_place(&mut v);
                }
                v
            })
            .collect();
        let refs: Vec<&[f64]> = normed.iter().map(|v| v.as_slice()).collect();
        let (mut a, mut b) = self.predict_normalized(&refs)?;
        stats.denormalize_in_place(&mut a);
        stats.denormalize_in_place(&mut b);
        Ok((a, b))
    }

    /// All tensors, including normalization statistics and a config record.
    pub fn to_param_set(&self) -> Result<ParamSet> {
        let mut set = self.params.clone();
        let stats = self
            .norm
            .as_ref()
            .ok_or_else(|| Error::State("cannot save a predictor without normalization statistics".into()))?;
        let f = self.config.n_mels;
        set.insert(format!("{PREFIX}.norm.mean"), Tensor::from_vec(&[f], stats.mean.clone())?)?;
        set.insert(format!("{PREFIX}.norm.std"), Tensor::from_vec(&[f], stats.std.clone())?)?;
        let c = &self.config;
        set.insert(
            format!("{PREFIX}.config"),
            Tensor::from_vec(&[3], vec![c.history as f64, c.n_mels as f64, c.hidden as f64])?,
        )?;
        Ok(set)
    }

    fn known_names() -> Vec<String> {
        let mut names: Vec<String> = (0..N_LAYERS).flat_map(|i| [weight_name(i), bias_name(i)]).collect();
        names.extend(["norm.mean", "norm.std", "config"].iter().map(|s| format!("{PREFIX}.{s}")));
        names
    }

    /// Rebuilds a model from checkpoint tensors. Unknown tensors are skipped
    /// and reported in the returned warning list.
    pub fn from_param_set(set: &ParamSet) -> Result<(Self, Vec<String>)> {
        let cfg = set.value(&format!("{PREFIX}.config"))?.data();
        if cfg.len() != 3 {
            return Err(Error::Format("predictor.config must hold 3 values".into()));
        }
        let config = PredictorConfig {
            history: cfg[0] as usize,
            n_mels: cfg[1] as usize,
            hidden: cfg[2] as usize,
        };
        config.validate()?;
        let mut params = ParamSet::new();
        for (i, &(din, dout)) in config.layer_shapes().iter().enumerate() {
            let w = set.value(&weight_name(i))?;
            w.expect_shape(&[din, dout], &weight_name(i)).map_err(|e| Error::Format(e.to_string()))?;
            let b = set.value(&bias_name(i))?;
            b.expect_shape(&[dout], &bias_name(i)).map_err(|e| Error::Format(e.to_string()))?;
            params.insert(weight_name(i), w.clone())?;
            params.insert(bias_name(i), b.clone())?;
        }
        let norm = NormStats {
            mean: set.value(&format!("{PREFIX}.norm.mean"))?.data().to_vec(),
            std: set.value(&format!("{PREFIX}.norm.std"))?.data().to_vec(),
        };
        norm.check_dim(config.n_mels).map_err(|e| Error::Format(e.to_string()))?;
        let warnings = checkpoint::unknown_names(set, &Self::known_names())
            .into_iter()
            .map(|n| format!("ignoring unknown tensor {n:?}"))
            .collect();
        Ok((
            PredictorModel {
                config,
                params,
                norm: Some(norm),
            },
            warnings,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(&self.to_param_set()?, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        Self::from_param_set(&checkpoint::load(path)?)
    }
}

/// Predicts `(m_T, m_{T+1})` from `P` normalized history vectors.
pub fn predictor_forward(history: &[&[f64]], model: &PredictorModel) -> Result<(Vec<f64>, Vec<f64>)> {
    model.predict_normalized(history)
}

/// Mean squared error over both predicted frames.
pub fn predictor_loss(pred: (&[f64], &[f64]), target: (&[f64], &[f64])) -> Result<f64> {
    if pred.0.len() != target.0.len() || pred.1.len() != target.1.len() {
        return Err(Error::Shape(format!(
            "prediction ({}, {}) vs target ({}, {})",
            pred.0.len(),
            pred.1.len(),
            target.0.len(),
            target.1.len()
        )));
    }
    let n = (pred.0.len() + pred.1.len()).max(1) as f64;
    let sum: f64 = pred
        .0
        .iter()
        .chain(pred.1)
        .zip(target.0.iter().chain(target.1))
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// One supervised example: flattened history and the two target frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// All `(P history, 2 target)` windows of normalized sequences, in order.
pub fn build_windows(sequences: &[MelSpectrogram], history: usize) -> Result<Vec<Window>> {
    let mut windows = Vec::new();
    for (i, seq) in sequences.iter().enumerate() {
        if seq.n_frames() < history + 2 {
            return Err(Error::Data(format!(
                "sequence {i} has {} frames, need at least {}",
                seq.n_frames(),
                history + 2
            )));
        }
        for t in history..=seq.n_frames() - 2 {
            let input: Vec<f64> = (t - history..t).flat_map(|j| seq.row(j).iter().copied()).collect();
            let target: Vec<f64> = seq.row(t).iter().chain(seq.row(t + 1)).copied().collect();
            windows.push(Window { input, target });
        }
    }
    Ok(windows)
}

fn stack(windows: &[&Window], cfg: &PredictorConfig) -> Result<(Tensor, Tensor)> {
    let x: Vec<f64> = windows.iter().flat_map(|w| w.input.iter().copied()).collect();
    let y: Vec<f64> = windows.iter().flat_map(|w| w.target.iter().copied()).collect();
    Ok((
        Tensor::from_vec(&[windows.len(), cfg.input_dim()], x)?,
        Tensor::from_vec(&[windows.len(), cfg.output_dim()], y)?,
    ))
}

/// Mean loss of `model` over every window (no gradient).
pub fn evaluate(model: &PredictorModel, windows: &[Window]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    let mut total = 0.0;
    for chunk in windows.chunks(256) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let (x, y) = stack(&refs, model.config())?;
        let (pred, _) = model.forward_batch(&x)?;
        total += mse_loss(&pred, &y)?.0 * chunk.len() as f64;
    }
    Ok(total / windows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Visit windows in a seeded random order each epoch instead of sequentially.
    pub shuffle: bool,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for PredictorTrainConfig {
    fn default() -> Self {
        PredictorTrainConfig {
            steps: 2000,
            batch_size: 32,
            lr: 1e-3,
            shuffle: true,
            clip_norm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mini-batch loss before each update.
    pub losses: Vec<f64>,
}

/// Cycles through windows in epochs, optionally reshuffled each time.
struct Batcher {
    order: Vec<usize>,
    pos: usize,
    shuffle: bool,
    rng: ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, shuffle: bool, rng: ChaCha8Rng) -> Self {
        let mut b = Batcher {
            order: (0..n).collect(),
            pos: n,
            shuffle,
            rng,
        };
        b.pos = b.order.len();
        b
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                if self.shuffle {
                    self.order.shuffle(&mut self.rng);
                }
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn optimise(
    model: &mut PredictorModel,
    windows: &[Window],
    cfg: &PredictorTrainConfig,
    seed: u64,
) -> Result<TrainLog> {
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Parameter("batch_size and lr must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batcher_rng = ChaCha8Rng::from_rng(&mut rng);
    let mut batcher = Batcher::new(windows.len(), cfg.shuffle, batcher_rng);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut log = TrainLog::default();
    let batch = cfg.batch_size.min(windows.len());
    for step in 1..=cfg.steps {
        let idx = batcher.next_batch(batch);
        let refs: Vec<&Window> = idx.iter().map(|&i| &windows[i]).collect();
        let (x, y) = stack(&refs, model.config())?;
        model.params.zero_grad();
        let loss = model.loss_and_grad(&x, &y)?;
        if cfg.clip_norm > 0.0 {
            model.params.clip_grad_norm(cfg.clip_norm);
        }
        opt.step(&mut model.params, step as u64)?;
        log.losses.push(loss);
    }
    Ok(log)
}

/// Fits normalization statistics over the corpus, then trains a fresh model
/// on every `(P, 2)` window with Adam.
pub fn train_predictor(
    corpus: &[MelSpectrogram],
    arch: PredictorConfig,
    cfg: &PredictorTrainConfig,
    seed: u64,
) -> Result<(PredictorModel, TrainLog)> {
    if corpus.is_empty() {
        return Err(Error::Data("empty training corpus".into()));
    }
    if let Some(m) = corpus.iter().find(|m| m.n_mels() != arch.n_mels) {
        return Err(Error::Shape(format!(
            "corpus has {} Mel bands, model expects {}",
            m.n_mels(),
            arch.n_mels
        )));
    }
    let stats = NormStats::fit(corpus.iter().flat_map(|m| m.rows()))?;
    let normed = corpus.iter().map(|m| m.normalize(&stats)).collect::<Result<Vec<_>>>()?;
    let windows = build_windows(&normed, arch.history)?;
    let mut model = PredictorModel::new(arch, seed)?;
    model.set_norm(stats)?;
    let log = optimise(&mut model, &windows, cfg, seed.wrapping_add(1))?;
    Ok((model, log))
}

/// Experimental: fine-tunes on windows whose newest history frame is the
/// model's own estimate, matching what the engine feeds after a loss.
/// The substituted frame is treated as a constant input.
pub fn finetune_rollout(
    model: &mut PredictorModel,
    corpus: &[MelSpectrogram],
    cfg: &PredictorTrainConfig,
    seed: u64,
) -> Result<TrainLog> {
    let stats = model
        .norm
        .clone()
        .ok_or_else(|| Error::State("fine-tuning needs a trained predictor".into()))?;
    let p = model.config.history;
    let f = model.config.n_mels;
    let mut windows = Vec::new();
    for seq in corpus {
        let seq = seq.normalize(&stats)?;
        if seq.n_frames() < p + 3 {
            continue;
        }
        for t in p + 1..=seq.n_frames() - 2 {
            let older: Vec<&[f64]> = (t - 1 - p..t - 1).map(|j| seq.row(j)).collect();
            let (estimate, _) = model.predict_normalized(&older)?;
            let mut input: Vec<f64> = (t - p..t - 1).flat_map(|j| seq.row(j).iter().copied()).collect();
            input.extend_from_slice(&estimate[..f]);
            let target = seq.row(t).iter().chain(seq.row(t + 1)).copied().collect();
            windows.push(Window { input, target });
        }
    }
    if windows.is_empty() {
        return Err(Error::Data(format!("no sequence has the {} frames rollout needs", p + 3)));
    }
    optimise(model, &windows, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FrameConfig;
    use crate::nn::gradcheck::{central_difference, relative_error};
    use rand::Rng;

    fn micro() -> PredictorConfig {
        PredictorConfig {
            history: 3,
            n_mels: 4,
            hidden: 8,
        }
    }

    fn random_rows(n: usize, f: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn paper_dimensions() {
        let cfg = PredictorConfig::default();
        assert_eq!(cfg.input_dim(), 880);
        assert_eq!(cfg.output_dim(), 160);
        assert_eq!(cfg.layer_shapes(), [(880, 2048), (2048, 2048), (2048, 2048), (2048, 160)]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut m = PredictorModel::new(micro(), 1).unwrap();
        for (_, p) in m.params_mut().iter_mut() {
            p.value.fill(0.0);
        }
        let rows = random_rows(3, 4, 2);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (a, b) = predictor_forward(&refs, &m).unwrap();
        assert!(a.iter().chain(&b).all(|&v| v == 0.0));
    }

    #[test]
    fn matches_dense_chain_oracle() {
        let m = PredictorModel::new(micro(), 3).unwrap();
        let rows = random_rows(3, 4, 4);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (a, b) = predictor_forward(&refs, &m).unwrap();
        // plain nested loops over the same weights
        let mut h: Vec<f64> = rows.concat();
        for layer in 0..N_LAYERS {
            let w = m.params().value(&weight_name(layer)).unwrap();
            let bias = m.params().value(&bias_name(layer)).unwrap();
            let (din, dout) = (w.dim(0), w.dim(1));
            let mut next = vec![0.0; dout];
            for o in 0..dout {
                let mut acc = bias.data()[o];
                for i in 0..din {
                    acc += h[i] * w.data()[i * dout + o];
                }
                next[o] = if layer + 1 < N_LAYERS { 1.0 / (1.0 + (-acc).exp()) } else { acc };
            }
            h = next;
        }
        for (x, y) in a.iter().chain(&b).zip(&h) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn forward_is_bitwise_repeatable() {
        let m = PredictorModel::new(micro(), 5).unwrap();
        let rows = random_rows(3, 4, 6);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert_eq!(predictor_forward(&refs, &m).unwrap(), predictor_forward(&refs, &m).unwrap());
    }

    #[test]
    fn wrong_history_rejected() {
        let m = PredictorModel::new(micro(), 5).unwrap();
        let rows = random_rows(2, 4, 6);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(matches!(predictor_forward(&refs, &m), Err(Error::Shape(_))));
        let rows = random_rows(3, 5, 6);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(matches!(predictor_forward(&refs, &m), Err(Error::Shape(_))));
    }

    #[test]
    fn loss_values() {
        let t = (vec![1.0, 2.0], vec![3.0, 4.0]);
        assert_eq!(predictor_loss((&t.0, &t.1), (&t.0, &t.1)).unwrap(), 0.0);
        let p = (vec![2.0, 3.0], vec![4.0, 5.0]);
        assert_eq!(predictor_loss((&p.0, &p.1), (&t.0, &t.1)).unwrap(), 1.0);
        assert!(predictor_loss((&p.0, &t.0[..1]), (&t.0, &t.1)).is_err());
    }

    #[test]
    fn full_model_gradient_check() {
        let mut m = PredictorModel::new(micro(), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::from_vec(&[2, 12], (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = Tensor::from_vec(&[2, 8], (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        m.params_mut().zero_grad();
        m.loss_and_grad(&x, &y).unwrap();
        let names: Vec<String> = m.params().names().map(str::to_string).collect();
        for name in names {
            let analytic = m.params().get(&name).unwrap().grad.data().to_vec();
            let base = m.params().value(&name).unwrap().clone();
            let numeric = central_difference(base.data(), 1e-4, |v| {
                let mut probe = m.clone();
                *probe.params_mut().value_mut(&name).unwrap() = Tensor::from_vec(base.shape(), v.to_vec()).unwrap();
                let (pred, _) = probe.forward_batch(&x).unwrap();
                mse_loss(&pred, &y).unwrap().0
            });
            let err = relative_error(&analytic, &numeric);
            assert!(err <= 1e-4, "{name}: {err}");
        }
    }

    #[test]
    fn short_sequences_rejected() {
        let cfg = FrameConfig { n_mels: 4, ..FrameConfig::default() };
        let short = MelSpectrogram::from_rows(&random_rows(4, 4, 1), cfg).unwrap();
        assert!(matches!(
            train_predictor(&[short], micro(), &PredictorTrainConfig::default(), 1),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            train_predictor(&[], micro(), &PredictorTrainConfig::default(), 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn window_geometry() {
        let cfg = FrameConfig { n_mels: 1, ..FrameConfig::default() };
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let seq = MelSpectrogram::from_rows(&rows, cfg).unwrap();
        let w = build_windows(&[seq], 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].input, vec![0.0, 1.0, 2.0]);
        assert_eq!(w[0].target, vec![3.0, 4.0]);
        assert_eq!(w[2].target, vec![5.0, 6.0]);
    }

    #[test]
    fn checkpoint_round_trip_and_unknown_names() {
        let cfg = FrameConfig { n_mels: 4, ..FrameConfig::default() };
        let seq = MelSpectrogram::from_rows(&random_rows(20, 4, 2), cfg).unwrap();
        let train = PredictorTrainConfig { steps: 5, batch_size: 4, ..Default::default() };
        let (model, _) = train_predictor(&[seq], micro(), &train, 9).unwrap();
        let mut set = model.to_param_set().unwrap();
        set.insert("predictor.future.thing", Tensor::zeros(&[2])).unwrap();
        let bytes = checkpoint::to_bytes(&set).unwrap();
        let (loaded, warnings) = PredictorModel::from_param_set(&checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("predictor.future.thing"));
        assert_eq!(loaded.config(), model.config());
        // second save of the loaded model is byte-identical (f32 fixed point)
        let again = checkpoint::to_bytes(&loaded.to_param_set().unwrap()).unwrap();
        let mut without = checkpoint::from_bytes(&bytes).unwrap();
        without.remove("predictor.future.thing");
        assert_eq!(again, checkpoint::to_bytes(&without).unwrap());
    }

    #[test]
    fn predict_requires_stats() {
        let m = PredictorModel::new(micro(), 1).unwrap();
        let rows = random_rows(3, 4, 6);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(matches!(m.predict(&refs), Err(Error::State(_))));
    }

    #[test]
    fn paper_shapes_take_a_step() {
        let cfg = FrameConfig::default();
        let seq = MelSpectrogram::from_rows(&random_rows(16, 80, 3), cfg).unwrap();
        let train = PredictorTrainConfig { steps: 2, batch_size: 2, ..Default::default() };
        let (model, log) = train_predictor(&[seq], PredictorConfig::default(), &train, 4).unwrap();
        assert_eq!(log.losses.len(), 2);
        assert!(log.losses.iter().all(|l| l.is_finite()));
        assert_eq!(model.params().value("predictor.l2.w").unwrap().shape(), &[2048, 2048]);
    }
}
