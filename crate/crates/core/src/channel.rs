//! Gilbert-Elliot two-state packet loss channel.
//!
//! The chain has a good state `G` and a bad state `B`. `alpha` is the
//! probability of moving G→B, `beta` of moving B→G, and each state drops a
//! packet with its own probability (`p_g`, `p_b`). The burstiness indicator
//! is `lambda = 1 - (alpha + beta)`; `lambda = 0` degenerates to a Bernoulli
//! channel.
//!
//! Traces are realised with a ChaCha8 generator seeded from a `u64`. The
//! initial state is drawn from the stationary distribution, then every
//! packet consumes two uniforms: one for the loss decision in the current
//! state and one for the transition to the next state.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Highest loss rate for which the transition probabilities are derived.
pub const MAX_PLR: f64 = 0.5;

/// Parameters of the two-state channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub lambda: f64,
    pub p_g: f64,
    pub p_b: f64,
    /// G → B transition probability.
    pub alpha: f64,
    /// B → G transition probability.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelState {
    Good,
    Bad,
}

/// Per-packet loss flags (`true` = lost) together with the seed that made them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossTrace {
    pub flags: Vec<bool>,
    pub seed: u64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::Parameter(format!("{name}={v} must lie in [0, 1]")));
    }
    Ok(())
}

impl ChannelParams {
    /// Derives `alpha` and `beta` from a target mean loss rate.
    pub fn derive(plr: f64, lambda: f64, p_g: f64, p_b: f64) -> Result<Self> {
        if !(0.0..=MAX_PLR).contains(&plr) {
            return Err(Error::Parameter(format!(
                "plr={plr} outside [0, {MAX_PLR}]"
            )));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::Parameter(format!(
                "lambda={lambda} outside [0, 1); lambda = 1 freezes the chain"
            )));
        }
        check_unit("p_g", p_g)?;
        check_unit("p_b", p_b)?;
        if p_g >= p_b {
            return Err(Error::Parameter(format!(
                "p_g={p_g} must be strictly below p_b={p_b}"
            )));
        }
        if plr < p_g || plr > p_b {
            return Err(Error::Parameter(format!(
                "plr={plr} outside [p_g, p_b] = [{p_g}, {p_b}]"
            )));
        }
        let ratio = (p_b - plr) / (p_b - p_g);
        let alpha = (1.0 - lambda) * (1.0 - ratio);
        let beta = (1.0 - lambda) * ratio;
        let params = ChannelParams {
            lambda,
            p_g,
            p_b,
            alpha,
            beta,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<()> {
        check_unit("lambda", self.lambda)?;
        check_unit("p_g", self.p_g)?;
        check_unit("p_b", self.p_b)?;
        check_unit("alpha", self.alpha)?;
        check_unit("beta", self.beta)?;
        if self.p_g > self.p_b {
            return Err(Error::Parameter(format!(
                "p_g={} exceeds p_b={}",
                self.p_g, self.p_b
            )));
        }
        let sum = self.alpha + self.beta;
        if (sum - (1.0 - self.lambda)).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "alpha + beta = {sum} but 1 - lambda = {}",
                1.0 - self.lambda
            )));
        }
        Ok(())
    }

    /// Stationary probability of the bad state.
    pub fn stationary_bad(&self) -> Result<f64> {
        let sum = self.alpha + self.beta;
        if sum <= 0.0 {
            return Err(Error::Parameter(
                "alpha = beta = 0: the chain has no unique stationary distribution".into(),
            ));
        }
        Ok(self.alpha / sum)
    }

    /// Long-run mean packet loss rate of the channel.
    pub fn mean_plr(&self) -> Result<f64> {
        self.validate()?;
        if self.alpha + self.beta <= 0.0 || self.lambda >= 1.0 {
            return Err(Error::Parameter(
                "alpha = beta = 0 (lambda = 1): mean loss rate undefined".into(),
            ));
        }
        let scale = 1.0 - self.lambda;
        Ok(self.alpha / scale * self.p_b + self.beta / scale * self.p_g)
    }

    /// Walks the chain for `n` packets, returning the visited states and loss flags.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<(Vec<ChannelState>, Vec<bool>)> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Parameter("packet count must be positive".into()));
        }
        let p_bad = self.stationary_bad()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = if rng.random::<f64>() < p_bad {
            ChannelState::Bad
        } else {
            ChannelState::Good
        };
        let mut states = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for _ in 0..n {
            let (p_loss, p_leave) = match state {
                ChannelState::Good => (self.p_g, self.alpha),
                ChannelState::Bad => (self.p_b, self.beta),
            };
            states.push(state);
            flags.push(rng.random::<f64>() < p_loss);
            if rng.random::<f64>() < p_leave {
                state = match state {
                    ChannelState::Good => ChannelState::Bad,
                    ChannelState::Bad => ChannelState::Good,
                };
            }
        }
        Ok((states, flags))
    }

    /// Generates a reproducible loss trace of `n` packets.
    pub fn generate_trace(&self, n: usize, seed: u64) -> Result<LossTrace> {
        let (_, flags) = self.simulate(n, seed)?;
        Ok(LossTrace { flags, seed })
    }
}

/// Free-function form of [`ChannelParams::derive`].
pub fn derive_params(plr: f64, lambda: f64, p_g: f64, p_b: f64) -> Result<ChannelParams> {
    ChannelParams::derive(plr, lambda, p_g, p_b)
}

/// Free-function form of [`ChannelParams::mean_plr`].
pub fn mean_plr(params: &ChannelParams) -> Result<f64> {
    params.mean_plr()
}

/// Free-function form of [`ChannelParams::generate_trace`].
pub fn generate_trace(params: &ChannelParams, n_packets: usize, seed: u64) -> Result<LossTrace> {
    params.generate_trace(n_packets, seed)
}

const TRACE_MAGIC: &str = "#plc-trace";

impl LossTrace {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn lost_count(&self) -> usize {
        self.flags.iter().filter(|&&l| l).count()
    }

    /// Serialises to the ASCII trace format: an optional header line, then one
    /// `0`/`1` character per packet and a trailing newline.
    pub fn to_text(&self, plr: Option<f64>) -> String {
        let mut out = String::with_capacity(self.flags.len() + 64);
        if let Some(p) = plr {
            let _ = writeln!(out, "{TRACE_MAGIC} v1 seed={} plr={p}", self.seed);
        }
        out.extend(self.flags.iter().map(|&l| if l { '1' } else { '0' }));
        out.push('\n');
        out
    }

    /// Parses the ASCII trace format. Header lines start with `#`; a
    /// `seed=` field is picked up when present, everything else is ignored.
    pub fn parse(text: &str) -> Result<LossTrace> {
        let mut flags = Vec::new();
        let seed = parse_header(text).map(|h| h.0).unwrap_or(0);
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') {
                continue;
            }
            for (col, ch) in line.trim_end_matches('\r').chars().enumerate() {
                match ch {
                    '0' => flags.push(false),
                    '1' => flags.push(true),
                    other => {
                        return Err(Error::Format(format!(
                            "trace line {} column {}: unexpected character {other:?}",
                            lineno + 1,
                            col + 1
                        )))
                    }
                }
            }
        }
        if flags.is_empty() {
            return Err(Error::Data("trace contains no packets".into()));
        }
        Ok(LossTrace { flags, seed })
    }
}

/// Extracts `(seed, plr)` from a `#plc-trace v1` header, if one is present.
pub fn parse_header(text: &str) -> Option<(u64, Option<f64>)> {
    let line = text.lines().find(|l| l.starts_with(TRACE_MAGIC))?;
    let mut seed = None;
    let mut plr = None;
    for field in line.split_whitespace() {
        if let Some(v) = field.strip_prefix("seed=") {
            seed = v.parse().ok();
        } else if let Some(v) = field.strip_prefix("plr=") {
            plr = v.parse().ok();
        }
    }
    Some((seed?, plr))
}
