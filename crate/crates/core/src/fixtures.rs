//! Deterministic synthetic speech-like corpus for desk-scale runs.
//!
//! Sixty seconds at 16 kHz in two-second clips: linear sine sweeps,
//! harmonic tones with vibrato and noise-modulated loudness, and a periodic
//! sub-corpus whose frames repeat exactly every few hops.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::AudioBuffer;

pub const SAMPLE_RATE: u32 = 16_000;
pub const CLIP_SECONDS: usize = 2;
pub const N_SWEEPS: usize = 12;
pub const N_HARMONIC: usize = 12;
pub const N_PERIODIC: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub audio: AudioBuffer,
}

fn clip_len() -> usize {
    CLIP_SECONDS * SAMPLE_RATE as usize
}

fn buffer(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, SAMPLE_RATE).expect("synthesized samples are finite")
}

fn sweep(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = clip_len();
    let f_start = rng.random_range(100.0..1500.0);
    let f_end = rng.random_range(100.0..3000.0);
    let amp = rng.random_range(0.15..0.45);
    let dur = n as f64 / SAMPLE_RATE as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            amp * (2.0 * PI * (f_start * t + 0.5 * (f_end - f_start) * t * t / dur)).sin()
        })
        .collect()
}

/// One-pole low-passed white noise scaled to roughly unit peak.
fn slow_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = 0.999;
    let mut y = 0.0;
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            y = a * y + (1.0 - a) * rng.random_range(-1.0..1.0);
            y
        })
        .collect();
    let peak = raw.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
    raw.into_iter().map(|v| v / peak).collect()
}

fn harmonic(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = clip_len();
    let f0 = rng.random_range(90.0..280.0);
    let vibrato = rng.random_range(2.0..6.0);
    let depth = rng.random_range(0.0..0.04);
    let n_harm = rng.random_range(4..12);
    let env = slow_noise(n, rng);
    let floor = slow_noise(n, rng);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let f = f0 * (1.0 + depth * (2.0 * PI * vibrato * t).sin());
            phase += 2.0 * PI * f / SAMPLE_RATE as f64;
            let tone: f64 = (1..=n_harm)
                .filter(|h| f0 * *h as f64 <= 7_500.0)
                .map(|h| (h as f64 * phase).sin() / h as f64)
                .sum();
            let loud = 0.2 * (0.6 + 0.4 * env[i]);
            loud * tone + 0.01 * floor[i] * rng.random_range(-1.0..1.0)
        })
        .collect()
}

/// A fundamental whose period divides 160 samples under an envelope that
/// repeats every eight 160-sample hops, so Mel frames cycle exactly.
fn periodic(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = clip_len();
    let f0 = [100.0, 200.0, 400.0][rng.random_range(0..3)];
    let amps: Vec<f64> = (0..6).map(|h| rng.random_range(0.2..1.0) / (h + 1) as f64).collect();
    let cycle = 8 * 160;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let env = 0.55 + 0.45 * (2.0 * PI * (i % cycle) as f64 / cycle as f64).sin();
            let tone: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * f0 * (h + 1) as f64 * t).sin())
                .sum();
            0.2 * env * tone
        })
        .collect()
}

/// The full sixty-second corpus; the periodic clips come last.
pub fn fixture_corpus(seed: u64) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(N_SWEEPS + N_HARMONIC + N_PERIODIC);
    for i in 0..N_SWEEPS {
        out.push(Fixture {
            name: format!("sweep_{i:02}"),
            audio: buffer(sweep(&mut rng)),
        });
    }
    for i in 0..N_HARMONIC {
        out.push(Fixture {
            name: format!("harmonic_{i:02}"),
            audio: buffer(harmonic(&mut rng)),
        });
    }
    out.extend(periodic_corpus(seed));
    out
}

/// The periodic sub-corpus alone.
pub fn periodic_corpus(seed: u64) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7065_7269_6f64);
    (0..N_PERIODIC)
        .map(|i| Fixture {
            name: format!("periodic_{i:02}"),
            audio: buffer(periodic(&mut rng)),
        })
        .collect()
}
