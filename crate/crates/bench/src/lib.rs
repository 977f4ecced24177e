//! Benchmark inputs shared by the bench targets.

use plc_core::dsp::AudioBuffer;

/// One second of a two-tone test signal at `sample_rate`.
pub fn tone(sample_rate: u32) -> AudioBuffer {
    let sr = f64::from(sample_rate);
    let samples = (0..sample_rate as usize)
        .map(|n| {
            let t = n as f64 / sr;
            0.4 * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 0.2 * (2.0 * std::f64::consts::PI * 1330.0 * t).sin()
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite tone")
}
