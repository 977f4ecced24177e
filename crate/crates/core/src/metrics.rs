//! Objective evaluation: log-spectral distortion, loss-trace statistics and
//! Mel-domain error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::LossTrace;
use crate::dsp::{frame_count, AudioBuffer, FeatureExtractor, FrameConfig, MelSpectrogram, LOG_FLOOR_POWER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lsd {
    /// Mean over the frames that were scored, in dB.
    pub mean_db: f64,
    pub n_frames: usize,
    /// Frames skipped because every reference bin sat at the power floor.
    pub excluded: usize,
}

fn db(p: f64) -> f64 {
    10.0 * p.max(LOG_FLOOR_POWER).log10()
}

fn fit_length(samples: &[f64], len: usize) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.resize(len, 0.0);
    v
}

/// Log-spectral distortion between two signals.
///
/// Each frame scores `sqrt(mean_k (10 log10 P_ref(k) - 10 log10 P_test(k))^2)`
/// over the `fft_size/2 + 1` bins of the windowed power spectrum, with power
/// floored at `1e-10`. The test signal is padded or truncated to the
/// reference length; signals shorter than one frame are zero-padded.
pub fn lsd(reference: &AudioBuffer, test: &AudioBuffer, frames: &FrameConfig) -> Result<Lsd> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::Data("cannot score an empty signal".into()));
    }
    if reference.len() != test.len() {
        log::warn!(
            "test has {} samples, reference {}; fitting test to reference",
            test.len(),
            reference.len()
        );
    }
    let len = reference.len().max(frames.frame_len);
    let r = fit_length(&reference.samples, len);
    let t = fit_length(&test.samples, len);
    let fx = FeatureExtractor::new(frames)?;
    let (mut sum, mut n, mut excluded) = (0.0, 0usize, 0usize);
    for i in 0..frame_count(len, frames) {
        let span = i * frames.hop..i * frames.hop + frames.frame_len;
        let pr = fx.power_spectrum(&r[span.clone()]);
        if pr.iter().all(|&p| p <= LOG_FLOOR_POWER) {
            excluded += 1;
            continue;
        }
        let pt = fx.power_spectrum(&t[span]);
        let mse = pr.iter().zip(&pt).map(|(a, b)| (db(*a) - db(*b)).powi(2)).sum::<f64>() / pr.len() as f64;
        sum += mse.sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("reference is silent in every frame".into()));
    }
    Ok(Lsd {
        mean_db: sum / n as f64,
        n_frames: n,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub packets: usize,
    pub lost: usize,
    pub plr: f64,
    /// Run length of consecutive losses -> number of runs.
    pub bursts: BTreeMap<usize, usize>,
}

impl TraceStats {
    pub fn mean_burst(&self) -> Option<f64> {
        let runs: usize = self.bursts.values().sum();
        (runs > 0).then(|| self.lost as f64 / runs as f64)
    }
}

/// Loss fraction and burst-length histogram of a trace.
pub fn empirical_plr(trace: &LossTrace) -> Result<TraceStats> {
    if trace.flags.is_empty() {
        return Err(Error::Data("empty trace".into()));
    }
    let mut bursts = BTreeMap::new();
    let mut run = 0usize;
    for &lost in trace.flags.iter().chain(std::iter::once(&false)) {
        if lost {
            run += 1;
        } else if run > 0 {
            *bursts.entry(run).or_insert(0) += 1;
            run = 0;
        }
    }
    let lost = trace.flags.iter().filter(|&&l| l).count();
    Ok(TraceStats {
        packets: trace.len(),
        lost,
        plr: lost as f64 / trace.len() as f64,
        bursts,
    })
}

/// Mean squared error over every entry of two equally shaped spectrograms.
pub fn mel_mse(predicted: &MelSpectrogram, truth: &MelSpectrogram) -> Result<f64> {
    if predicted.n_frames() != truth.n_frames() || predicted.n_mels() != truth.n_mels() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{} Mel frames",
            predicted.n_frames(),
            predicted.n_mels(),
            truth.n_frames(),
            truth.n_mels()
        )));
    }
    let n = predicted.data().len().max(1) as f64;
    Ok(predicted
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
}

/// Scores of one (reference, test) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    /// Concealment method or free-form label.
    pub label: String,
    /// Nominal loss rate of the trace, when known.
    pub plr: Option<f64>,
    pub plr_empirical: Option<f64>,
    pub lsd_db: f64,
    pub mel_mse: f64,
    pub n_frames: usize,
    pub excluded_frames: usize,
}

/// Scores `test` against `reference`, optionally with the trace that
/// produced it.
pub fn evaluate(
    label: &str,
    reference: &AudioBuffer,
    test: &AudioBuffer,
    trace: Option<&LossTrace>,
    plr: Option<f64>,
    frames: &FrameConfig,
) -> Result<EvalRun> {
    let l = lsd(reference, test, frames)?;
    let fx = FeatureExtractor::new(frames)?;
    let len = reference.len().max(frames.frame_len);
    let mel_r = fx.log_mel(&fit_length(&reference.samples, len))?;
    let mel_t = fx.log_mel(&fit_length(&test.samples, len))?;
    Ok(EvalRun {
        label: label.to_string(),
        plr,
        plr_empirical: trace.map(empirical_plr).transpose()?.map(|s| s.plr),
        lsd_db: l.mean_db,
        mel_mse: mel_mse(&mel_t, &mel_r)?,
        n_frames: l.n_frames,
        excluded_frames: l.excluded,
    })
}

/// Aggregate over one or more runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean LSD over all runs, in dB.
    pub lsd_db: f64,
    /// Mean empirical loss rate over runs that had a trace.
    pub plr_empirical: Option<f64>,
    pub mel_mse: f64,
    /// Frames scored across all runs.
    pub n_frames: usize,
    pub runs: Vec<EvalRun>,
}

impl EvalReport {
    pub fn from_runs(runs: Vec<EvalRun>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Data("no evaluation runs".into()));
        }
        let n = runs.len() as f64;
        let plrs: Vec<f64> = runs.iter().filter_map(|r| r.plr_empirical).collect();
        Ok(EvalReport {
            lsd_db: runs.iter().map(|r| r.lsd_db).sum::<f64>() / n,
            plr_empirical: (!plrs.is_empty()).then(|| plrs.iter().sum::<f64>() / plrs.len() as f64),
            mel_mse: runs.iter().map(|r| r.mel_mse).sum::<f64>() / n,
            n_frames: runs.iter().map(|r| r.n_frames).sum(),
            runs,
        })
    }

    /// Mean LSD per label, over all runs carrying that label.
    pub fn mean_lsd(&self, label: &str) -> Option<f64> {
        let v: Vec<f64> = self.runs.iter().filter(|r| r.label == label).map(|r| r.lsd_db).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean LSD laid out with one row per label and one column per loss rate.
    /// Runs without a nominal rate fall back to the empirical one.
    pub fn table(&self) -> String {
        let key = |r: &EvalRun| r.plr.or(r.plr_empirical).map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into());
        let mut labels: Vec<&str> = Vec::new();
        let mut cols: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        for r in &self.runs {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
            let k = key(r);
            if !cols.contains(&k) {
                cols.push(k.clone());
            }
            let e = cells.entry((r.label.clone(), k)).or_insert((0.0, 0));
            e.0 += r.lsd_db;
            e.1 += 1;
        }
        cols.sort();
        let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max("method".len());
        let mut out = format!("LSD (dB)\n{:<width$}", "method");
        for c in &cols {
            let _ = write!(out, "  {:>8}", format!("PLR {c}"));
        }
        out.push('\n');
        for l in &labels {
            let _ = write!(out, "{l:<width$}");
            for c in &cols {
                match cells.get(&(l.to_string(), c.clone())) {
                    Some((s, n)) => {
                        let _ = write!(out, "  {:>8.3}", s / *n as f64);
                    }
                    None => {
                        let _ = write!(out, "  {:>8}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn buffer(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(samples, 16_000).unwrap()
    }

    fn fixture(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let t = i as f64 / 16_000.0;
                0.3 * (2.0 * PI * 180.0 * t).sin() + 0.1 * (2.0 * PI * 1250.0 * t).sin() + rng.random_range(-0.05..0.05)
            })
            .collect()
    }

    /// Two passes: explicit windowed DFT per frame, then the dB RMS.
    fn brute_force_lsd(r: &[f64], t: &[f64], cfg: &FrameConfig) -> f64 {
        let (w, h, nfft) = (cfg.frame_len, cfg.hop, cfg.fft_size);
        let hann: Vec<f64> = (0..w).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / w as f64).cos()).collect();
        let spectrum = |x: &[f64]| -> Vec<f64> {
            (0..=nfft / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, (&v, &win)) in x.iter().zip(&hann).enumerate() {
                        let ang = -2.0 * PI * (k * n) as f64 / nfft as f64;
                        re += v * win * ang.cos();
                        im += v * win * ang.sin();
                    }
                    re * re + im * im
                })
                .collect()
        };
        let frames = (r.len() - w) / h + 1;
        let per_frame: Vec<f64> = (0..frames)
            .map(|i| {
                let pr = spectrum(&r[i * h..i * h + w]);
                let pt = spectrum(&t[i * h..i * h + w]);
                let d: f64 = pr
                    .iter()
                    .zip(&pt)
                    .map(|(a, b)| (10.0 * a.max(1e-10).log10() - 10.0 * b.max(1e-10).log10()).powi(2))
                    .sum();
                (d / pr.len() as f64).sqrt()
            })
            .collect();
        per_frame.iter().sum::<f64>() / frames as f64
    }

    #[test]
    fn identical_signals_score_zero() {
        let x = buffer(fixture(4_000, 1));
        let l = lsd(&x, &x, &FrameConfig::default()).unwrap();
        assert_eq!(l.mean_db, 0.0);
        assert_eq!(l.n_frames, 24);
    }

    #[test]
    fn gain_of_ten_is_twenty_db() {
        let x = fixture(4_000, 2);
        let y: Vec<f64> = x.iter().map(|v| 10.0 * v).collect();
        let l = lsd(&buffer(x), &buffer(y), &FrameConfig::default()).unwrap();
        assert!((l.mean_db - 20.0).abs() < 1e-9, "{}", l.mean_db);
        for g in [0.5, 3.0] {
            let x = fixture(2_000, 3);
            let y: Vec<f64> = x.iter().map(|v| g * v).collect();
            let l = lsd(&buffer(x), &buffer(y), &FrameConfig::default()).unwrap();
            assert!((l.mean_db - (20.0 * f64::log10(g)).abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_brute_force_on_one_second() {
        let cfg = FrameConfig::default();
        let r = fixture(16_000, 4);
        let t = fixture(16_000, 5);
        let fast = lsd(&buffer(r.clone()), &buffer(t.clone()), &cfg).unwrap().mean_db;
        let slow = brute_force_lsd(&r, &t, &cfg);
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }

    #[test]
    fn symmetric_and_gain_invariant() {
        let cfg = FrameConfig::default();
        let r = fixture(3_000, 6);
        let t = fixture(3_000, 7);
        let a = lsd(&buffer(r.clone()), &buffer(t.clone()), &cfg).unwrap().mean_db;
        let b = lsd(&buffer(t.clone()), &buffer(r.clone()), &cfg).unwrap().mean_db;
        assert!((a - b).abs() < 1e-12);
        let g = |v: &[f64]| v.iter().map(|x| 2.5 * x).collect::<Vec<_>>();
        let c = lsd(&buffer(g(&r)), &buffer(g(&t)), &cfg).unwrap().mean_db;
        assert!((a - c).abs() < 1e-9);
    }

    #[test]
    fn silent_reference_frames_are_excluded() {
        let cfg = FrameConfig::default();
        let mut r = fixture(3_200, 8);
        r[..1_000].iter_mut().for_each(|v| *v = 0.0);
        let l = lsd(&buffer(r.clone()), &buffer(r), &cfg).unwrap();
        assert_eq!(l.excluded, 5);
        assert_eq!(l.n_frames + l.excluded, 19);
        let silent = buffer(vec![0.0; 1_000]);
        assert!(matches!(lsd(&silent, &silent, &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn mismatched_lengths_are_fitted() {
        let cfg = FrameConfig::default();
        let r = fixture(3_000, 9);
        let short = buffer(r[..2_000].to_vec());
        let padded = buffer(fit_length(&r[..2_000], 3_000));
        let a = lsd(&buffer(r.clone()), &short, &cfg).unwrap();
        let b = lsd(&buffer(r), &padded, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_statistics() {
        let t = LossTrace {
            flags: [0, 1, 1, 0, 1, 0, 0, 1, 1, 1].iter().map(|&v| v == 1).collect(),
            seed: 0,
        };
        let s = empirical_plr(&t).unwrap();
        assert_eq!((s.packets, s.lost), (10, 6));
        assert_eq!(s.bursts, BTreeMap::from([(1, 1), (2, 1), (3, 1)]));
        assert_eq!(s.mean_burst(), Some(2.0));
        let none = LossTrace { flags: vec![false; 5], seed: 0 };
        assert_eq!(empirical_plr(&none).unwrap().plr, 0.0);
        let all = LossTrace { flags: vec![true; 5], seed: 0 };
        assert_eq!(empirical_plr(&all).unwrap().plr, 1.0);
        assert!(empirical_plr(&LossTrace { flags: vec![], seed: 0 }).is_err());
    }

    #[test]
    fn burst_mean_matches_sojourn_arithmetic() {
        let params = ChannelParams::derive(0.2, 0.5, 0.0, 0.5).unwrap();
        let trace = params.generate_trace(1_000_000, 11).unwrap();
        let s = empirical_plr(&trace).unwrap();
        assert!((s.plr - 0.2).abs() < 0.01);
        // a burst ends at the first received packet; in the bad state that
        // needs a departure or a lucky draw
        let expected = 1.0 / (1.0 - (1.0 - params.beta) * params.p_b);
        let mean = s.mean_burst().unwrap();
        assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
    }

    #[test]
    fn mel_mse_cases() {
        let cfg = FrameConfig::desk();
        let a = MelSpectrogram::new(vec![1.0; 3 * cfg.n_mels], cfg).unwrap();
        let b = MelSpectrogram::new(vec![1.5; 3 * cfg.n_mels], cfg).unwrap();
        assert_eq!(mel_mse(&a, &a).unwrap(), 0.0);
        assert!((mel_mse(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        let c = MelSpectrogram::new(vec![0.0; 2 * cfg.n_mels], cfg).unwrap();
        assert!(matches!(mel_mse(&a, &c), Err(Error::Shape(_))));
    }

    #[test]
    fn report_and_table() {
        let cfg = FrameConfig::default();
        let r = buffer(fixture(4_000, 12));
        let t = buffer(fixture(4_000, 13));
        let trace = LossTrace { flags: vec![false, true, false, false], seed: 0 };
        let runs = vec![
            evaluate("neural", &r, &t, Some(&trace), Some(0.2), &cfg).unwrap(),
            evaluate("silence", &r, &r, Some(&trace), Some(0.2), &cfg).unwrap(),
            evaluate("silence", &r, &t, None, Some(0.3), &cfg).unwrap(),
        ];
        let report = EvalReport::from_runs(runs).unwrap();
        assert_eq!(report.runs[1].lsd_db, 0.0);
        assert_eq!(report.runs[0].plr_empirical, Some(0.25));
        assert_eq!(report.plr_empirical, Some(0.25));
        let table = report.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains("PLR 0.20") && lines[1].contains("PLR 0.30"));
        assert!(lines[2].starts_with("neural") && lines[2].trim_end().ends_with('-'));
        assert!(lines[3].starts_with("silence"));
    }
}
