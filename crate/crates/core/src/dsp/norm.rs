use crate::error::{Error, Result};

/// Lower bound applied to per-band standard deviations.
pub const STD_FLOOR: f64 = 1e-5;

/// Per-band mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population statistics over a set of equally sized rows.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for row in rows {
            if count == 0 {
                sum = vec![0.0; row.len()];
                sum_sq = vec![0.0; row.len()];
            } else if row.len() != sum.len() {
                return Err(Error::Shape(format!(
                    "row of {} bands, expected {}",
                    row.len(),
                    sum.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Data("cannot fit normalization on zero frames".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt().max(STD_FLOOR))
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.mean.len() != dim || self.std.len() != dim {
            return Err(Error::Shape(format!(
                "normalization statistics have {} bands, data has {dim}",
                self.mean.len()
            )));
        }
        if self.std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::Parameter("standard deviations must be positive".into()));
        }
        Ok(())
    }

    pub fn normalize_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn denormalize_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_normalize_to_zero() {
        let row = vec![1.5, -2.0, 7.0];
        let rows = vec![row.clone(); 10];
        let stats = NormStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert!(stats.std.iter().all(|&s| s == STD_FLOOR));
        let mut r = row.clone();
        stats.normalize_in_place(&mut r);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let rows: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(
            NormStats::fit(rows.iter().map(|r| r.as_slice())),
            Err(Error::Data(_))
        ));
    }
}
