//! Streaming packet-loss concealment.
//!
//! One packet carries one analysis frame. Received frames pass straight
//! through; a lost frame is replaced by a substitute and blended into the
//! output with the Hann synthesis window. Wherever every frame covering a
//! hop is received, the output copies the input exactly.
//!
//! Substitutes come from one of three methods:
//! * `neural`: predict the next two Mel frames, synthesize `P + 2` frames of
//!   audio with the flow vocoder and cut out the frame whose opening best
//!   matches the tail of the previous frame.
//! * `wsola`: the same similarity search run over recent output history.
//! * `silence`: zeros.

mod select;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::LossTrace;
use crate::dsp::{hann_periodic, AudioBuffer, FeatureExtractor, FrameConfig};
use crate::error::{Error, Result};
use crate::predictor::PredictorModel;
use crate::vocoder::{infer_waveform, ConditioningWindow, FlowModel, DEFAULT_SIGMA};

pub use select::{correlation_profile, select_substitution, Selection, MIN_ENERGY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Neural,
    Silence,
    Wsola,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Neural, Method::Silence, Method::Wsola];

    pub fn name(self) -> &'static str {
        match self {
            Method::Neural => "neural",
            Method::Silence => "silence",
            Method::Wsola => "wsola",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method {s:?} (expected neural, silence or wsola)")))
    }
}

/// One frame's worth of payload, or `None` when the packet was lost.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub index: usize,
    pub payload: Option<Vec<f64>>,
}

/// Number of packets needed to carry `n_samples` samples.
pub fn packet_count(n_samples: usize, frames: &FrameConfig) -> usize {
    if n_samples <= frames.frame_len {
        1
    } else {
        (n_samples - frames.frame_len).div_ceil(frames.hop) + 1
    }
}

/// Splits zero-padded audio into frames and drops the ones the trace marks
/// lost. A trace longer than needed is truncated; a shorter one is an error.
pub fn packetize(audio: &[f64], trace: &LossTrace, frames: &FrameConfig) -> Result<Vec<Packet>> {
    let n = packet_count(audio.len(), frames);
    if trace.len() < n {
        return Err(Error::Data(format!(
            "trace holds {} packets, audio needs {n}",
            trace.len()
        )));
    }
    if trace.len() > n {
        log::warn!("trace has {} packets, using the first {n}", trace.len());
    }
    let mut padded = audio.to_vec();
    padded.resize(frames.span(n), 0.0);
    Ok((0..n)
        .map(|k| Packet {
            index: k,
            payload: (!trace.flags[k]).then(|| padded[k * frames.hop..k * frames.hop + frames.frame_len].to_vec()),
        })
        .collect())
}

/// Trained models for the neural method.
#[derive(Debug, Clone, Copy)]
pub struct NeuralModels<'a> {
    pub predictor: &'a PredictorModel,
    pub vocoder: &'a FlowModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcealConfig {
    pub frames: FrameConfig,
    /// Latent deviation for vocoder sampling.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for ConcealConfig {
    fn default() -> Self {
        ConcealConfig {
            frames: FrameConfig::default(),
            sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpliceOffset {
    pub packet: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcealReport {
    pub method: Method,
    pub packets: usize,
    pub lost: usize,
    pub concealed_neural: usize,
    pub concealed_wsola: usize,
    pub concealed_silence: usize,
    /// Losses filled with silence because too little history existed.
    pub concealed_silence_coldstart: usize,
    pub splice_offsets: Vec<SpliceOffset>,
    /// Packets where the similarity search had nothing to correlate.
    pub fallbacks: Vec<usize>,
}

impl ConcealReport {
    fn new(method: Method) -> Self {
        ConcealReport {
            method,
            packets: 0,
            lost: 0,
            concealed_neural: 0,
            concealed_wsola: 0,
            concealed_silence: 0,
            concealed_silence_coldstart: 0,
            splice_offsets: Vec::new(),
            fallbacks: Vec::new(),
        }
    }
}

/// Recent Mel frames and output samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    mel_frames: VecDeque<Vec<f64>>,
    mel_capacity: usize,
    audio_tail: VecDeque<f64>,
    tail_capacity: usize,
    frames_seen: usize,
}

impl HistoryBuffer {
    pub fn new(mel_capacity: usize, tail_capacity: usize) -> Self {
        HistoryBuffer {
            mel_frames: VecDeque::with_capacity(mel_capacity + 1),
            mel_capacity: mel_capacity.max(1),
            audio_tail: VecDeque::with_capacity(tail_capacity + 1),
            tail_capacity,
            frames_seen: 0,
        }
    }

    pub fn push_mel(&mut self, mel: Vec<f64>) {
        self.mel_frames.push_back(mel);
        while self.mel_frames.len() > self.mel_capacity {
            self.mel_frames.pop_front();
        }
        self.frames_seen += 1;
    }

    pub fn push_audio(&mut self, samples: &[f64]) {
        self.audio_tail.extend(samples);
        while self.audio_tail.len() > self.tail_capacity {
            self.audio_tail.pop_front();
        }
    }

    /// Oldest first.
    pub fn mel_frames(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.mel_frames.iter()
    }

    pub fn mel_len(&self) -> usize {
        self.mel_frames.len()
    }

    /// Final output samples, oldest first.
    pub fn audio_tail(&self) -> Vec<f64> {
        self.audio_tail.iter().copied().collect()
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }
}

/// Causal concealer fed one packet at a time.
///
/// Feeding packet `k` finalizes output hop `k`, the samples
/// `[k*hop, (k+1)*hop)`; [`StreamConcealer::finish`] emits the last hop.
pub struct StreamConcealer<'a> {
    method: Method,
    cfg: ConcealConfig,
    models: Option<NeuralModels<'a>>,
    features: FeatureExtractor,
    window: Vec<f64>,
    history: HistoryBuffer,
    /// Content of the previous frame and whether it was received.
    prev: Option<(Vec<f64>, bool)>,
    next_index: usize,
    report: ConcealReport,
}

impl<'a> StreamConcealer<'a> {
    pub fn new(method: Method, cfg: ConcealConfig, models: Option<NeuralModels<'a>>) -> Result<Self> {
        let frames = cfg.frames;
        frames.validate()?;
        if !(cfg.sigma >= 0.0) || !cfg.sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be finite and non-negative, got {}", cfg.sigma)));
        }
        let mut history_frames = 1;
        if method == Method::Neural {
            let m = models.ok_or_else(|| Error::State("neural concealment needs a predictor and a vocoder".into()))?;
            let (p, v) = (m.predictor.config(), m.vocoder.config());
            if p.n_mels != frames.n_mels || v.n_mels != frames.n_mels || v.hop != frames.hop {
                return Err(Error::Parameter(format!(
                    "models expect {} / {} bands at hop {}, features use {} at hop {}",
                    p.n_mels, v.n_mels, v.hop, frames.n_mels, frames.hop
                )));
            }
            history_frames = p.history;
        }
        Ok(StreamConcealer {
            method,
            features: FeatureExtractor::new(&frames)?,
            window: hann_periodic(frames.frame_len),
            history: HistoryBuffer::new(history_frames, 2 * frames.hop + frames.frame_len),
            prev: None,
            next_index: 0,
            report: ConcealReport::new(method),
            cfg,
            models,
        })
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn report(&self) -> &ConcealReport {
        &self.report
    }

    /// Consumes the next packet and returns the hop it finalizes.
    pub fn push(&mut self, packet: &Packet) -> Result<Vec<f64>> {
        let (w, h) = (self.cfg.frames.frame_len, self.cfg.frames.hop);
        if packet.index != self.next_index {
            return Err(Error::Data(format!(
                "packet {} arrived, expected {}",
                packet.index, self.next_index
            )));
        }
        let (content, received) = match &packet.payload {
            Some(frame) if frame.len() == w => (frame.clone(), true),
            Some(frame) => {
                return Err(Error::Shape(format!("packet {} carries {} samples, expected {w}", packet.index, frame.len())))
            }
            None => {
                self.report.lost += 1;
                (self.substitute(packet.index)?, false)
            }
        };
        let prev_received = self.prev.as_ref().is_none_or(|p| p.1);
        let hop: Vec<f64> = if received && prev_received {
            content[..h].to_vec()
        } else {
            (0..h)
                .map(|i| {
                    let tail = self.prev.as_ref().map_or(0.0, |(p, _)| self.window[h + i] * p[h + i]);
                    tail + self.window[i] * content[i]
                })
                .collect()
        };
        self.history.push_audio(&hop);
        self.history.push_mel(self.features.frame_log_mel(&content));
        self.prev = Some((content, received));
        self.next_index += 1;
        self.report.packets += 1;
        Ok(hop)
    }

    /// Emits the second half of the final frame.
    pub fn finish(self) -> (Vec<f64>, ConcealReport) {
        let h = self.cfg.frames.hop;
        let tail = match &self.prev {
            None => Vec::new(),
            Some((p, true)) => p[h..].to_vec(),
            Some((p, false)) => (0..h).map(|i| self.window[h + i] * p[h + i]).collect(),
        };
        (tail, self.report)
    }

    /// Final output samples followed by the previous frame's second half.
    fn continuation(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let h = self.cfg.frames.hop;
        let (prev, _) = self.prev.as_ref()?;
        let pattern = prev[h..].to_vec();
        let mut span = self.history.audio_tail();
        span.extend_from_slice(&pattern);
        Some((pattern, span))
    }

    fn substitute(&mut self, index: usize) -> Result<Vec<f64>> {
        let w = self.cfg.frames.frame_len;
        let silence = vec![0.0; w];
        match self.method {
            Method::Silence => {
                self.report.concealed_silence += 1;
                Ok(silence)
            }
            Method::Wsola => match self.continuation() {
                Some((pattern, span)) if span.len() >= w => {
                    let sel = select_substitution(&pattern, &span, w, self.search_len())?;
                    self.record(index, &sel);
                    self.report.concealed_wsola += 1;
                    Ok(sel.frame)
                }
                _ => {
                    self.report.concealed_silence_coldstart += 1;
                    Ok(silence)
                }
            },
            Method::Neural => {
                let models = self.models.expect("checked at construction");
                let p = models.predictor.config().history;
                if self.history.mel_len() < p || self.prev.is_none() {
                    self.report.concealed_silence_coldstart += 1;
                    return Ok(silence);
                }
                let hist: Vec<&[f64]> = self.history.mel_frames().map(|v| v.as_slice()).collect();
                let (m0, m1) = models.predictor.predict(&hist)?;
                let mut rows: Vec<Vec<f64>> = self.history.mel_frames().cloned().collect();
                rows.push(m0);
                rows.push(m1);
                let window = ConditioningWindow::new(rows, p, &self.cfg.frames)?;
                let seed = packet_seed(self.cfg.seed, index);
                let generated = infer_waveform(&window, models.vocoder, self.cfg.sigma, seed)?;
                let (pattern, _) = self.continuation().expect("previous frame exists");
                let sel = select_substitution(&pattern, &generated.samples, w, self.search_len())?;
                self.record(index, &sel);
                self.report.concealed_neural += 1;
                Ok(sel.frame)
            }
        }
    }

    fn search_len(&self) -> usize {
        2 * self.cfg.frames.hop + self.cfg.frames.frame_len
    }

    fn record(&mut self, index: usize, sel: &Selection) {
        if sel.fallback {
            log::warn!("packet {index}: pattern too quiet to correlate, using the tail");
            self.report.fallbacks.push(index);
        }
        self.report.splice_offsets.push(SpliceOffset {
            packet: index,
            offset: sel.offset,
        });
    }
}

/// Per-packet sampling seed, decorrelated across packets.
pub fn packet_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Runs a whole packet sequence through a [`StreamConcealer`] and returns
/// `n_samples` of output.
pub fn conceal_packets(
    packets: &[Packet],
    n_samples: usize,
    method: Method,
    cfg: &ConcealConfig,
    models: Option<NeuralModels<'_>>,
) -> Result<(AudioBuffer, ConcealReport)> {
    if packets.is_empty() {
        return Err(Error::Data("no packets to conceal".into()));
    }
    let mut stream = StreamConcealer::new(method, *cfg, models)?;
    let mut out = Vec::with_capacity(cfg.frames.span(packets.len()));
    for p in packets {
        out.extend(stream.push(p)?);
    }
    let (tail, report) = stream.finish();
    out.extend(tail);
    out.truncate(n_samples);
    Ok((AudioBuffer::new(out, cfg.frames.sample_rate)?, report))
}

/// Conceals `audio` as if sent over a channel that dropped the packets the
/// trace marks lost.
pub fn conceal_stream(
    audio: &AudioBuffer,
    trace: &LossTrace,
    method: Method,
    cfg: &ConcealConfig,
    models: Option<NeuralModels<'_>>,
) -> Result<(AudioBuffer, ConcealReport)> {
    if audio.sample_rate != cfg.frames.sample_rate {
        return Err(Error::Data(format!(
            "audio at {} Hz, features expect {} Hz",
            audio.sample_rate, cfg.frames.sample_rate
        )));
    }
    let packets = packetize(&audio.samples, trace, &cfg.frames)?;
    conceal_packets(&packets, audio.len(), method, cfg, models)
}

pub fn silence_baseline(audio: &AudioBuffer, trace: &LossTrace, frames: &FrameConfig) -> Result<AudioBuffer> {
    let cfg = ConcealConfig {
        frames: *frames,
        ..ConcealConfig::default()
    };
    Ok(conceal_stream(audio, trace, Method::Silence, &cfg, None)?.0)
}

pub fn wsola_baseline(audio: &AudioBuffer, trace: &LossTrace, frames: &FrameConfig) -> Result<AudioBuffer> {
    let cfg = ConcealConfig {
        frames: *frames,
        ..ConcealConfig::default()
    };
    Ok(conceal_stream(audio, trace, Method::Wsola, &cfg, None)?.0)
}

#[cfg(test)]
mod tests;
