//! Run configuration: one TOML file, every section optional, unknown keys
//! rejected. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use plc_core::predictor::{PredictorConfig, PredictorTrainConfig};
use plc_core::vocoder::{FlowConfig, VocoderTrainConfig, DEFAULT_SIGMA};
use plc_core::FrameConfig;

/// Environment variable consulted when neither a flag nor the config sets a seed.
pub const SEED_ENV: &str = "PLC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub plr: f64,
    pub lambda: f64,
    pub p_g: f64,
    pub p_b: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            plr: 0.2,
            lambda: 0.5,
            p_g: 0.0,
            p_b: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcealSection {
    pub sigma: f64,
}

impl Default for ConcealSection {
    fn default() -> Self {
        ConcealSection { sigma: DEFAULT_SIGMA }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocoder: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub frames: FrameConfig,
    pub channel: ChannelSection,
    pub predictor: PredictorConfig,
    pub predictor_train: PredictorTrainConfig,
    pub vocoder: FlowConfig,
    pub vocoder_train: VocoderTrainConfig,
    pub conceal: ConcealSection,
    pub models: ModelPaths,
}

impl RunConfig {
    /// Reduced shapes that train on a laptop CPU in minutes.
    pub fn desk() -> Self {
        let predictor = PredictorConfig::desk();
        RunConfig {
            frames: FrameConfig::desk(),
            predictor,
            vocoder: FlowConfig::desk(),
            vocoder_train: VocoderTrainConfig {
                segment_frames: predictor.history + 2,
                ..VocoderTrainConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// The file at `path`, or defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let bad = |msg: String| CliError::Config {
            path: origin.to_path_buf(),
            msg,
        };
        self.frames.validate().map_err(|e| bad(e.to_string()))?;
        self.vocoder.validate().map_err(|e| bad(e.to_string()))?;
        let f = self.frames.n_mels;
        if self.predictor.n_mels != f || self.vocoder.n_mels != f {
            return Err(bad(format!(
                "predictor.n_mels={} and vocoder.n_mels={} must equal frames.n_mels={f}",
                self.predictor.n_mels, self.vocoder.n_mels
            )));
        }
        if self.vocoder.hop != self.frames.hop {
            return Err(bad(format!(
                "vocoder.hop={} must equal frames.hop={}",
                self.vocoder.hop, self.frames.hop
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Flag, then config file, then [`SEED_ENV`], then zero.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }
}

/// Writes the effective configuration beside an output file.
pub fn echo(cfg: &RunConfig, output: &Path) -> Result<PathBuf> {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    let path = output.with_file_name(name);
    std::fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::desk();
        cfg.seed = Some(7);
        cfg.models.vocoder = Some("v.plcm".into());
        let back = RunConfig::parse(&cfg.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::parse("[predictor_train]\nsteps = 5\n", Path::new("x")).unwrap();
        assert_eq!(cfg.predictor_train.steps, 5);
        assert_eq!(cfg.predictor_train.batch_size, PredictorTrainConfig::default().batch_size);
        assert_eq!(cfg.frames, FrameConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1\n", "[frames]\nhop_size = 3\n", "[nonsense]\n"] {
            let err = RunConfig::parse(text, Path::new("bad.toml")).unwrap_err();
            assert!(matches!(err, CliError::Config { .. }), "{text}");
        }
    }

    #[test]
    fn inconsistent_shapes_are_rejected() {
        let err = RunConfig::parse("[frames]\nn_mels = 40\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("n_mels"));
    }

    #[test]
    fn flag_beats_file() {
        let cfg = RunConfig {
            seed: Some(3),
            ..RunConfig::default()
        };
        assert_eq!(cfg.resolve_seed(Some(9)).unwrap(), 9);
        assert_eq!(cfg.resolve_seed(None).unwrap(), 3);
    }
}
