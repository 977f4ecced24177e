//! Minimal RIFF/WAVE codec for 16-bit mono PCM at 16 kHz.
//!
//! Samples map to `[-1, 1)` by division by 32768. On write, values are
//! scaled by 32768, rounded to nearest and clamped to the `i16` range, so
//! a read followed by a write reproduces the original sample words.

use std::fs;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

pub const WAV_SAMPLE_RATE: u32 = 16_000;
const PCM_FORMAT: u16 = 1;
const SCALE: f64 = 32768.0;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut fmt_seen = false;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                let format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if format != PCM_FORMAT || bits != 16 {
                    return Err(Error::Format(format!(
                        "only 16-bit PCM is supported (format {format}, {bits} bits)"
                    )));
                }
                if channels != 1 {
                    return Err(Error::Format(format!("expected mono, got {channels} channels")));
                }
                if rate != WAV_SAMPLE_RATE {
                    return Err(Error::Format(format!(
                        "expected {WAV_SAMPLE_RATE} Hz, got {rate} Hz (no resampling)"
                    )));
                }
                fmt_seen = true;
            }
            b"data" => {
                if !fmt_seen {
                    return Err(Error::Format("data chunk before fmt chunk".into()));
                }
                if size % 2 != 0 {
                    return Err(Error::Format("odd data chunk size for 16-bit samples".into()));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / SCALE)
                    .collect();
                return AudioBuffer::new(samples, WAV_SAMPLE_RATE);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }
    Err(Error::Format("no data chunk".into()))
}

pub fn to_pcm16(x: f64) -> i16 {
    (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn encode(audio: &AudioBuffer) -> Result<Vec<u8>> {
    if audio.sample_rate != WAV_SAMPLE_RATE {
        return Err(Error::Parameter(format!(
            "can only write {WAV_SAMPLE_RATE} Hz audio, got {}",
            audio.sample_rate
        )));
    }
    let data_len = u32::try_from(audio.samples.len() * 2)
        .map_err(|_| Error::Data("audio too long for a WAV file".into()))?;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&WAV_SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(WAV_SAMPLE_RATE * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &audio.samples {
        out.extend_from_slice(&to_pcm16(s).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    decode(&fs::read(path)?)
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    fs::write(path, encode(audio)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let audio = AudioBuffer::new(vec![0.0, 0.5, -1.0], 16_000).unwrap();
        let bytes = encode(&audio).unwrap();
        assert_eq!(bytes.len(), 44 + 6);
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(&bytes[44..], &[0, 0, 0, 0x40, 0, 0x80]);
    }

    #[test]
    fn rejects_other_layouts() {
        let audio = AudioBuffer::new(vec![0.1; 4], 16_000).unwrap();
        let good = encode(&audio).unwrap();

        let mut stereo = good.clone();
        stereo[22] = 2;
        assert!(matches!(decode(&stereo), Err(Error::Format(_))));

        let mut rate = good.clone();
        rate[24..28].copy_from_slice(&44_100u32.to_le_bytes());
        assert!(matches!(decode(&rate), Err(Error::Format(_))));

        let mut truncated = good.clone();
        truncated.truncate(46);
        assert!(matches!(decode(&truncated), Err(Error::Format(_))));

        assert!(decode(b"RIFX").is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let audio = AudioBuffer::new(vec![0.25, -0.25], 16_000).unwrap();
        let good = encode(&audio).unwrap();
        let mut with_list = good[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&good[36..]);
        assert_eq!(decode(&with_list).unwrap(), audio);
    }

    proptest! {
        #[test]
        fn pcm_words_survive_round_trip(words in proptest::collection::vec(any::<i16>(), 0..200)) {
            let audio = AudioBuffer::new(words.iter().map(|&w| w as f64 / 32768.0).collect(), 16_000).unwrap();
            let back = decode(&encode(&audio).unwrap()).unwrap();
            let back_words: Vec<i16> = back.samples.iter().map(|&s| to_pcm16(s)).collect();
            prop_assert_eq!(back_words, words);
            prop_assert_eq!(back, audio);
        }
    }
}
