use criterion::{criterion_group, criterion_main, Criterion};
use plc_core::dsp::FrameConfig;
use plc_core::vocoder::{infer_waveform, ConditioningWindow, FlowConfig, FlowModel};
use std::hint::black_box;

fn inverse(c: &mut Criterion) {
    let frames = FrameConfig::desk();
    let model = FlowModel::new(FlowConfig::desk(), 1).unwrap();
    let history = 5;
    let mel = vec![vec![-2.0; frames.n_mels]; history + 2];
    let cond = ConditioningWindow::new(mel, history, &frames).unwrap();
    c.bench_function("flow_inverse_desk_window", |b| {
        b.iter(|| infer_waveform(black_box(&cond), &model, 0.6, 7).unwrap())
    });
}

criterion_group!(benches, inverse);
criterion_main!(benches);
