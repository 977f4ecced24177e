//! Dense square-matrix helpers for the invertible channel mixes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// LU factorisation with partial pivoting of a row-major `n x n` matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Shape(format!("LU of {} values is not {n}x{n}", a.len())));
        }
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap_or(k);
            if pivot != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot * n + c);
                }
                perm.swap(k, pivot);
                swaps += 1;
            }
            let d = lu[k * n + k];
            if d == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for c in k + 1..n {
                    lu[i * n + c] -= f * lu[k * n + c];
                }
            }
        }
        Ok(Lu { n, lu, perm, swaps })
    }

    fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.lu[i * self.n + i])
    }

    pub fn is_singular(&self) -> bool {
        self.diag().any(|d| d == 0.0 || !d.is_finite())
    }

    pub fn det(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.diag().product::<f64>()
    }

    /// `log |det A|`; `-inf` for a singular matrix.
    pub fn log_abs_det(&self) -> f64 {
        self.diag().map(|d| d.abs().ln()).sum()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.is_singular() {
            return Err(Error::numeric("lu_solve", "matrix is singular"));
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            let x = self.solve(&e)?;
            for row in 0..n {
                inv[row * n + col] = x[row];
            }
        }
        Ok(inv)
    }
}

/// Random orthogonal matrix: QR (modified Gram-Schmidt) of a Gaussian
/// matrix, with column signs fixed so `R` has a positive diagonal.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
        // columns of a
        let mut q: Vec<Vec<f64>> = (0..n).map(|c| (0..n).map(|r| a[r * n + c]).collect()).collect();
        let mut ok = true;
        for c in 0..n {
            for prev in 0..c {
                let dot: f64 = q[c].iter().zip(&q[prev]).map(|(x, y)| x * y).sum();
                let (head, tail) = q.split_at_mut(c);
                for (v, p) in tail[0].iter_mut().zip(&head[prev]) {
                    *v -= dot * p;
                }
            }
            let norm = q[c].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            q[c].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            let mut out = vec![0.0; n * n];
            for c in 0..n {
                for r in 0..n {
                    out[r * n + c] = q[c][r];
                }
            }
            return out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Leibniz expansion over all permutations.
    fn det_by_permutations(a: &[f64], n: usize) -> f64 {
        fn rec(a: &[f64], n: usize, row: usize, used: &mut Vec<bool>, sign: f64, acc: f64, out: &mut f64) {
            if row == n {
                *out += sign * acc;
                return;
            }
            let mut inversions_before = 0;
            for c in 0..n {
                if used[c] {
                    continue;
                }
                // columns still free and smaller than c each add one inversion
                let s = if inversions_before % 2 == 0 { sign } else { -sign };
                used[c] = true;
                rec(a, n, row + 1, used, s, acc * a[row * n + c], out);
                used[c] = false;
                inversions_before += 1;
            }
        }
        let mut out = 0.0;
        rec(a, n, 0, &mut vec![false; n], 1.0, 1.0, &mut out);
        out
    }

    #[test]
    fn permutation_oracle_sanity() {
        assert_eq!(det_by_permutations(&[1.0, 2.0, 3.0, 4.0], 2), -2.0);
        let a = [2.0, 0.0, 1.0, 1.0, 3.0, 2.0, 1.0, 1.0, 2.0];
        assert!((det_by_permutations(&a, 3) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn log_det_matches_permutation_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let a: Vec<f64> = (0..64).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let lu = Lu::new(&a, 8).unwrap();
            let oracle = det_by_permutations(&a, 8);
            assert!((lu.det() - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
            assert!((lu.log_abs_det() - oracle.abs().ln()).abs() <= 1e-8);
        }
    }

    #[test]
    fn inverse_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_orthogonal(8, &mut rng);
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|r| q[r * 8 + i] * q[r * 8 + j]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let lu = Lu::new(&q, 8).unwrap();
        assert!(lu.log_abs_det().abs() < 1e-12);
        let inv = lu.inverse().unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((inv[i * 8 + j] - q[j * 8 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let lu = Lu::new(&[1.0, 2.0, 2.0, 4.0], 2).unwrap();
        assert!(lu.is_singular());
        assert_eq!(lu.log_abs_det(), f64::NEG_INFINITY);
        assert!(lu.solve(&[1.0, 1.0]).is_err());
    }
}
