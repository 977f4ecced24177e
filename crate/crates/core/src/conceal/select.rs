//! Waveform-similarity selection of a substitute frame.

use crate::error::{Error, Result};

/// Windows with less energy than this (after mean removal) are not compared.
pub const MIN_ENERGY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub frame: Vec<f64>,
    /// Start of the chosen frame within the searched span.
    pub offset: usize,
    /// True when the pattern or every candidate was too quiet to correlate
    /// and the final `frame_len` samples were taken instead.
    pub fallback: bool,
}

fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let energy = c.iter().map(|v| v * v).sum();
    (c, energy)
}

/// Normalized cross-correlation of `pattern` against `span[n..]` for every
/// `n` in `0..=span.len() - frame_len`. Quiet windows yield `None`.
pub fn correlation_profile(pattern: &[f64], span: &[f64], frame_len: usize) -> Vec<Option<f64>> {
    let (a, ea) = centered(pattern);
    if span.len() < frame_len || ea < MIN_ENERGY {
        return vec![None; (span.len() + 1).saturating_sub(frame_len)];
    }
    (0..=span.len() - frame_len)
        .map(|n| {
            let (b, eb) = centered(&span[n..n + pattern.len()]);
            (eb >= MIN_ENERGY).then(|| a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (ea * eb).sqrt())
        })
        .collect()
}

/// Picks the `frame_len`-sample frame whose opening best matches `pattern`.
///
/// The search span is the final `search_len` samples of `generated`; the
/// chosen start is the earliest offset within `1e-12` of the best score.
pub fn select_substitution(
    pattern: &[f64],
    generated: &[f64],
    frame_len: usize,
    search_len: usize,
) -> Result<Selection> {
    if pattern.is_empty() || pattern.len() > frame_len {
        return Err(Error::Shape(format!(
            "pattern of {} samples for frames of {frame_len}",
            pattern.len()
        )));
    }
    if generated.len() < frame_len || search_len < frame_len {
        return Err(Error::Shape(format!(
            "need at least {frame_len} samples to search, got {} (span {search_len})",
            generated.len()
        )));
    }
    let span = &generated[generated.len().saturating_sub(search_len)..];
    let profile = correlation_profile(pattern, span, frame_len);
    let best = profile.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = profile
        .iter()
        .position(|s| s.is_some_and(|v| v >= best - 1e-12) && best.is_finite());
    Ok(match pick {
        Some(offset) => Selection {
            frame: span[offset..offset + frame_len].to_vec(),
            offset,
            fallback: false,
        },
        None => {
            let offset = span.len() - frame_len;
            Selection {
                frame: span[offset..].to_vec(),
                offset,
                fallback: true,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Textbook Pearson correlation, one window at a time.
    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn finds_planted_copy() {
        let mut span = noise(640, 1);
        let pattern = noise(160, 2);
        span[100..260].copy_from_slice(&pattern);
        let sel = select_substitution(&pattern, &span, 320, 640).unwrap();
        assert_eq!(sel.offset, 100);
        assert!(!sel.fallback);
        assert_eq!(sel.frame, span[100..420].to_vec());
        // brute-force oracle agrees on every offset
        let profile = correlation_profile(&pattern, &span, 320);
        for (n, v) in profile.iter().enumerate() {
            assert!((v.unwrap() - pearson(&pattern, &span[n..n + 160])).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_in_phase_picks_zero() {
        let period = 40.0;
        let span: Vec<f64> = (0..640).map(|i| (2.0 * std::f64::consts::PI * i as f64 / period).sin()).collect();
        let pattern = span[..160].to_vec();
        let sel = select_substitution(&pattern, &span, 320, 640).unwrap();
        assert_eq!(sel.offset % 40, 0);
        assert_eq!(sel.offset, 0);
    }

    #[test]
    fn silent_pattern_falls_back_to_tail() {
        let span = noise(700, 3);
        let sel = select_substitution(&[0.0; 160], &span, 320, 640).unwrap();
        assert!(sel.fallback);
        assert_eq!(sel.frame, span[380..].to_vec());
        assert_eq!(sel.offset, 320);
    }

    #[test]
    fn argmax_ignores_pattern_gain() {
        let span = noise(640, 4);
        let pattern = noise(160, 5);
        let a = select_substitution(&pattern, &span, 320, 640).unwrap();
        let scaled: Vec<f64> = pattern.iter().map(|v| v * 37.5).collect();
        let b = select_substitution(&scaled, &span, 320, 640).unwrap();
        assert_eq!(a.offset, b.offset);
    }

    #[test]
    fn uses_only_the_final_search_span() {
        let mut gen = noise(2240, 6);
        let pattern = noise(160, 7);
        // a perfect match outside the final 640 samples must be ignored
        gen[100..260].copy_from_slice(&pattern);
        let sel = select_substitution(&pattern, &gen, 320, 640).unwrap();
        assert!(sel.offset <= 320);
        assert_eq!(sel.frame, gen[1600 + sel.offset..1600 + sel.offset + 320].to_vec());
    }
}
