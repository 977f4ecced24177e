use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::mel_spectrogram;
use crate::predictor::{train_predictor, PredictorConfig, PredictorTrainConfig};
use crate::vocoder::{train_vocoder, FlowConfig, VocoderTrainConfig};

fn frames() -> FrameConfig {
    FrameConfig::desk()
}

fn sine(n: usize, f0: f64, amp: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * PI * f0 * i as f64 / 16_000.0).sin()).collect()
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
}

fn trace(flags: Vec<bool>) -> LossTrace {
    LossTrace { flags, seed: 0 }
}

fn buffer(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, 16_000).unwrap()
}

fn cfg() -> ConcealConfig {
    ConcealConfig {
        frames: frames(),
        sigma: 0.3,
        seed: 9,
    }
}

/// Small models trained briefly on a few sinusoids.
fn models() -> &'static (PredictorModel, FlowModel) {
    static MODELS: OnceLock<(PredictorModel, FlowModel)> = OnceLock::new();
    MODELS.get_or_init(|| {
        let fr = frames();
        let corpus: Vec<AudioBuffer> = [220.0, 330.0, 440.0]
            .iter()
            .map(|&f| buffer(sine(16_000, f, 0.4)))
            .collect();
        let mels: Vec<_> = corpus.iter().map(|a| mel_spectrogram(&a.samples, &fr).unwrap()).collect();
        let arch = PredictorConfig {
            history: 3,
            n_mels: fr.n_mels,
            hidden: 16,
        };
        let pcfg = PredictorTrainConfig {
            steps: 200,
            ..PredictorTrainConfig::default()
        };
        let (predictor, _) = train_predictor(&mels, arch, &pcfg, 1).unwrap();
        let varch = FlowConfig {
            n_flows: 2,
            wn_layers: 2,
            wn_channels: 8,
            ..FlowConfig::desk()
        };
        let vcfg = VocoderTrainConfig {
            steps: 600,
            segment_frames: 5,
            lr: 2e-3,
            ..VocoderTrainConfig::default()
        };
        let (vocoder, _) = train_vocoder(&corpus, &fr, varch, &vcfg, 2).unwrap();
        (predictor, vocoder)
    })
}

fn neural() -> Option<NeuralModels<'static>> {
    let (p, v) = models();
    Some(NeuralModels {
        predictor: p,
        vocoder: v,
    })
}

fn run(audio: &[f64], flags: Vec<bool>, method: Method) -> (AudioBuffer, ConcealReport) {
    let models = if method == Method::Neural { neural() } else { None };
    conceal_stream(&buffer(audio.to_vec()), &trace(flags), method, &cfg(), models).unwrap()
}

#[test]
fn packet_geometry() {
    let fr = frames();
    assert_eq!(packet_count(320, &fr), 1);
    assert_eq!(packet_count(480, &fr), 2);
    assert_eq!(packet_count(481, &fr), 3);
    let audio: Vec<f64> = (0..500).map(|i| i as f64).collect();
    let packets = packetize(&audio, &trace(vec![false, true, false, false]), &fr).unwrap();
    assert_eq!(packets.len(), 3);
    assert_eq!(packets[0].payload.as_ref().unwrap()[..], audio[..320]);
    assert!(packets[1].payload.is_none());
    let last = packets[2].payload.as_ref().unwrap();
    assert_eq!(last[..180], audio[320..]);
    assert!(last[180..].iter().all(|&v| v == 0.0));
    assert!(matches!(packetize(&audio, &trace(vec![false; 2]), &fr), Err(Error::Data(_))));
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert!("gla".parse::<Method>().is_err());
}

#[test]
fn zero_loss_is_sample_exact_for_every_method() {
    let audio = noise(5_000, 1);
    let n = packet_count(audio.len(), &frames());
    for m in Method::ALL {
        let (out, report) = run(&audio, vec![false; n], m);
        assert_eq!(out.samples, audio, "{m}");
        assert_eq!((report.packets, report.lost), (n, 0));
    }
}

#[test]
fn neural_requires_models() {
    let err = StreamConcealer::new(Method::Neural, cfg(), None).err().unwrap();
    assert!(matches!(err, Error::State(_)));
}

#[test]
fn silence_all_lost_is_silent() {
    let audio = noise(3_000, 2);
    let n = packet_count(audio.len(), &frames());
    let (out, report) = run(&audio, vec![true; n], Method::Silence);
    assert!(out.samples.iter().all(|&v| v == 0.0));
    assert_eq!(report.concealed_silence, n);
}

#[test]
fn silence_zeroes_hops_covered_only_by_lost_frames() {
    let audio = noise(4_000, 3);
    let n = packet_count(audio.len(), &frames());
    let mut flags = vec![false; n];
    for k in [5, 6, 7, 12, 13, 20] {
        flags[k] = true;
    }
    let (out, _) = run(&audio, flags.clone(), Method::Silence);
    let h = frames().hop;
    for j in 1..n {
        let region = &out.samples[j * h..((j + 1) * h).min(out.len())];
        let energy: f64 = region.iter().map(|v| v * v).sum();
        if flags[j - 1] && flags[j] {
            assert_eq!(energy, 0.0, "hop {j}");
        } else if !flags[j - 1] && !flags[j] {
            assert_eq!(region, &audio[j * h..j * h + region.len()]);
        } else {
            assert!(energy > 0.0);
        }
    }
}

#[test]
fn output_never_depends_on_later_packets() {
    let fr = frames();
    let audio = sine(8_000, 310.0, 0.5);
    let n = packet_count(audio.len(), &fr);
    let mut flags = vec![false; n];
    for k in [8, 9, 15, 30, 31, 32] {
        flags[k] = true;
    }
    let packets = packetize(&audio, &trace(flags), &fr).unwrap();
    for m in Method::ALL {
        let models = if m == Method::Neural { neural() } else { None };
        let (base, _) = conceal_packets(&packets, audio.len(), m, &cfg(), models).unwrap();
        for cut in [9, 16, 31] {
            let mut changed = packets.clone();
            for p in changed.iter_mut().skip(cut) {
                if let Some(frame) = p.payload.as_mut() {
                    frame.iter_mut().for_each(|v| *v = -*v + 0.25);
                }
            }
            let (other, _) = conceal_packets(&changed, audio.len(), m, &cfg(), models).unwrap();
            let t = cut * fr.hop;
            assert_eq!(base.samples[..t], other.samples[..t], "{m} cut {cut}");
            assert_ne!(base.samples[t..], other.samples[t..], "{m} cut {cut}");
        }
    }
}

#[test]
fn wsola_continues_a_period() {
    let audio = sine(6_000, 200.0, 0.5);
    let n = packet_count(audio.len(), &frames());
    let mut flags = vec![false; n];
    flags[20] = true;
    let (out, report) = run(&audio, flags, Method::Wsola);
    assert_eq!(report.concealed_wsola, 1);
    assert!(report.fallbacks.is_empty());
    // rebuild the search inputs the engine saw and score the chosen offset
    let h = frames().hop;
    let pattern = &audio[20 * h..21 * h];
    let span = &audio[20 * h - 3 * h..21 * h];
    let profile = correlation_profile(pattern, span, 2 * h);
    let score = profile[report.splice_offsets[0].offset].unwrap();
    assert!(score >= 0.99, "score {score}");
    let err = out.samples.iter().zip(&audio).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "max error {err}");
}

#[test]
fn wsola_on_noise_keeps_energy_sane() {
    let h = frames().hop;
    for seed in 0..5 {
        let audio = noise(8_000, 10 + seed);
        let n = packet_count(audio.len(), &frames());
        let mut flags = vec![false; n];
        flags[25] = true;
        let (out, _) = run(&audio, flags, Method::Wsola);
        let energy = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
        let lost = energy(&out.samples[25 * h..27 * h]);
        let neighbour = energy(&out.samples[22 * h..24 * h]);
        let ratio = lost / neighbour;
        assert!((0.25..=4.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn cold_start_falls_back_to_silence() {
    let audio = sine(4_000, 250.0, 0.5);
    let n = packet_count(audio.len(), &frames());
    let mut flags = vec![false; n];
    flags[0] = true;
    flags[1] = true;
    let (out, report) = run(&audio, flags.clone(), Method::Wsola);
    assert_eq!(report.concealed_silence_coldstart, 1);
    assert_eq!(report.concealed_wsola, 1);
    assert!(out.samples[..160].iter().all(|&v| v == 0.0));

    // the neural method waits for P Mel frames of history
    flags[1] = false;
    flags[2] = true;
    flags[10] = true;
    let (out, report) = run(&audio, flags, Method::Neural);
    assert_eq!(report.concealed_silence_coldstart, 2);
    assert_eq!(report.concealed_neural, 1);
    assert_eq!(report.splice_offsets.len(), 1);
    assert_eq!(report.splice_offsets[0].packet, 10);
    assert!(out.samples.iter().all(|v| v.is_finite()));
}

#[test]
fn neural_splice_is_continuous() {
    let audio = sine(6_000, 330.0, 0.4);
    let own = audio.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let n = packet_count(audio.len(), &frames());
    let mut flags = vec![false; n];
    flags[18] = true;
    let (out, report) = run(&audio, flags, Method::Neural);
    assert_eq!(report.concealed_neural, 1);
    // the concealed span is [18h, 20h); check where it meets received audio
    let h = frames().hop;
    let jump = [18 * h, 20 * h]
        .iter()
        .flat_map(|&t| t - 2..t + 2)
        .map(|t| (out.samples[t + 1] - out.samples[t]).abs())
        .fold(0.0, f64::max);
    assert!(jump <= 4.0 * own, "jump {jump} vs {own}");
}

#[test]
fn history_tracks_the_newest_frames() {
    let fr = frames();
    let audio = noise(4_000, 4);
    let n = packet_count(audio.len(), &fr);
    let mut flags = vec![false; n];
    flags[4] = true;
    flags[5] = true;
    let packets = packetize(&audio, &trace(flags), &fr).unwrap();
    let mut stream = StreamConcealer::new(Method::Neural, cfg(), neural()).unwrap();
    let fx = FeatureExtractor::new(&fr).unwrap();
    let mut contents: Vec<Vec<f64>> = Vec::new();
    for (k, p) in packets.iter().enumerate() {
        stream.push(p).unwrap();
        let h = stream.history();
        assert_eq!(h.frames_seen(), k + 1);
        assert_eq!(h.mel_len(), (k + 1).min(3));
        if let Some(frame) = &p.payload {
            contents.push(frame.clone());
            let newest = h.mel_frames().last().unwrap();
            assert_eq!(newest, &fx.frame_log_mel(frame));
        }
    }
    assert!(matches!(
        stream.push(&Packet { index: 0, payload: None }),
        Err(Error::Data(_))
    ));
}
