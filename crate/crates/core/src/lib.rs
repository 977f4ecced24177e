//! Receiver-side packet loss concealment for 16 kHz speech.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: Gilbert-Elliot loss model and trace files.
//! - [`dsp`]: framing, FFT, Mel features, overlap-add and WAV I/O.
//! - [`nn`]: the small tensor/gradient substrate shared by both models.
//! - [`predictor`]: the feed-forward Mel predictor.
//! - [`vocoder`]: the conditional normalizing-flow vocoder.
//! - [`conceal`]: the streaming concealment engine and its baselines.
//! - [`metrics`]: log-spectral distortion and trace statistics.
//! - [`fixtures`]: a synthetic desk-scale corpus.

pub mod channel;
pub mod conceal;
pub mod dsp;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod nn;
pub mod predictor;
pub mod vocoder;

pub use channel::{ChannelParams, LossTrace};
pub use conceal::{ConcealReport, Method};
pub use dsp::{AudioBuffer, FrameConfig, MelSpectrogram, NormStats};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use nn::{ParamSet, Tensor};
pub use predictor::PredictorModel;
pub use vocoder::{FlowConfig, FlowModel};
