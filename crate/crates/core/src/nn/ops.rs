use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// `c = op(a) * op(b) + beta * c` for row-major buffers, where `op(a)` is
/// `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub fn matmul(
    a: &[f64],
    ta: Transpose,
    b: &[f64],
    tb: Transpose,
    m: usize,
    k: usize,
    n: usize,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "matmul buffer sizes");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match ta {
        Transpose::No => (k as isize, 1),
        Transpose::Yes => (1, m as isize),
    };
    let (rsb, csb) = match tb {
        Transpose::No => (n as isize, 1),
        Transpose::Yes => (1, k as isize),
    };
    // SAFETY: the asserts above guarantee every strided access stays inside
    // the three slices, and `c` does not alias `a` or `b` (borrow rules).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `y = x * w + b` with `x: [batch, in]`, `w: [in, out]`, `b: [out]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.shape().len() != 2 || w.shape().len() != 2 || x.dim(1) != w.dim(0) || b.shape() != [w.dim(1)] {
        return Err(Error::Shape(format!(
            "dense: input {:?}, weight {:?}, bias {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let (batch, din, dout) = (x.dim(0), x.dim(1), w.dim(1));
    let mut y = Tensor::zeros(&[batch, dout]);
    for row in y.data_mut().chunks_exact_mut(dout) {
        row.copy_from_slice(b.data());
    }
    matmul(x.data(), Transpose::No, w.data(), Transpose::No, batch, din, dout, 1.0, y.data_mut());
    y.check_finite("dense")?;
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<DenseGrads> {
    let (batch, din, dout) = (x.dim(0), x.dim(1), w.dim(1));
    dy.expect_shape(&[batch, dout], "dense backward")?;
    let mut dx = Tensor::zeros(&[batch, din]);
    matmul(dy.data(), Transpose::No, w.data(), Transpose::Yes, batch, dout, din, 0.0, dx.data_mut());
    let mut dw = Tensor::zeros(&[din, dout]);
    matmul(x.data(), Transpose::Yes, dy.data(), Transpose::No, din, batch, dout, 0.0, dw.data_mut());
    let mut db = Tensor::zeros(&[dout]);
    for row in dy.data().chunks_exact(dout) {
        for (g, &d) in db.data_mut().iter_mut().zip(row) {
            *g += d;
        }
    }
    Ok(DenseGrads { dx, dw, db })
}

fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    let y = x.map(sigmoid_scalar);
    y.check_finite("sigmoid")?;
    Ok(y)
}

/// Gradient of the logistic sigmoid expressed through its output `y`.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    dy.expect_shape(y.shape(), "sigmoid backward")?;
    let data = y.data().iter().zip(dy.data()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
    Tensor::from_vec(y.shape(), data)
}

pub fn tanh(x: &Tensor) -> Result<Tensor> {
    let y = x.map(f64::tanh);
    y.check_finite("tanh")?;
    Ok(y)
}

pub fn tanh_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    dy.expect_shape(y.shape(), "tanh backward")?;
    let data = y.data().iter().zip(dy.data()).map(|(&t, &g)| g * (1.0 - t * t)).collect();
    Tensor::from_vec(y.shape(), data)
}

/// Saved activations of a gated unit.
#[derive(Debug, Clone)]
pub struct GateCache {
    pub tanh_part: Tensor,
    pub sigmoid_part: Tensor,
}

/// WaveNet gate: splits `a: [batch, 2c, time]` into halves and returns
/// `tanh(a[:c]) * sigmoid(a[c:])`.
pub fn gate_forward(a: &Tensor) -> Result<(Tensor, GateCache)> {
    if a.shape().len() != 3 || a.dim(1) % 2 != 0 {
        return Err(Error::Shape(format!("gate: input {:?} needs an even channel count", a.shape())));
    }
    let c = a.dim(1) / 2;
    let tanh_part = tanh(&a.channels(0, c))?;
    let sigmoid_part = sigmoid(&a.channels(c, 2 * c))?;
    let data = tanh_part
        .data()
        .iter()
        .zip(sigmoid_part.data())
        .map(|(t, s)| t * s)
        .collect();
    let y = Tensor::from_vec(tanh_part.shape(), data)?;
    Ok((y, GateCache { tanh_part, sigmoid_part }))
}

pub fn gate_backward(cache: &GateCache, dy: &Tensor) -> Result<Tensor> {
    dy.expect_shape(cache.tanh_part.shape(), "gate backward")?;
    let mul = |a: &Tensor, b: &Tensor| -> Result<Tensor> {
        Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect())
    };
    let d_tanh = tanh_backward(&cache.tanh_part, &mul(dy, &cache.sigmoid_part)?)?;
    let d_sig = sigmoid_backward(&cache.sigmoid_part, &mul(dy, &cache.tanh_part)?)?;
    Tensor::concat_channels(&d_tanh, &d_sig)
}

/// Mean squared error over all entries and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "mse: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff: Vec<f64> = pred.data().iter().zip(target.data()).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::numeric("mse", "non-finite loss"));
    }
    let grad = Tensor::from_vec(pred.shape(), diff.iter().map(|d| 2.0 * d / n).collect())?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_transposes() {
        // a = [[1,2,3],[4,5,6]], b = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0; 4];
        matmul(&a, Transpose::No, &b, Transpose::No, 2, 3, 2, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // a^T stored as 3x2
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [0.0; 4];
        matmul(&at, Transpose::Yes, &bt, Transpose::Yes, 2, 3, 2, 0.0, &mut c2);
        assert_eq!(c2, c);
    }

    #[test]
    fn dense_identity() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let y = dense_forward(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn dense_paper_shapes() {
        let x = Tensor::zeros(&[2, 880]);
        let w = Tensor::zeros(&[880, 2048]);
        let y = dense_forward(&x, &w, &Tensor::zeros(&[2048])).unwrap();
        assert_eq!(y.shape(), &[2, 2048]);
        let err = dense_forward(&x, &Tensor::zeros(&[800, 2048]), &Tensor::zeros(&[2048])).unwrap_err();
        assert!(err.to_string().contains("[2, 880]") && err.to_string().contains("[800, 2048]"));
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&[3, 4], &mut rng);
        let w = random(&[4, 5], &mut rng);
        let b = random(&[5], &mut rng);
        let proj = random(&[3, 5], &mut rng);
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| {
            let y = dense_forward(x, w, b).unwrap();
            y.data().iter().zip(proj.data()).map(|(a, p)| a * p).sum::<f64>()
        };
        let g = dense_backward(&x, &w, &proj).unwrap();
        let nx = central_difference(x.data(), 1e-4, |v| loss(&Tensor::from_vec(&[3, 4], v.to_vec()).unwrap(), &w, &b));
        let nw = central_difference(w.data(), 1e-4, |v| loss(&x, &Tensor::from_vec(&[4, 5], v.to_vec()).unwrap(), &b));
        let nb = central_difference(b.data(), 1e-4, |v| loss(&x, &w, &Tensor::from_vec(&[5], v.to_vec()).unwrap()));
        assert!(relative_error(g.dx.data(), &nx) <= 1e-4);
        assert!(relative_error(g.dw.data(), &nw) <= 1e-4);
        assert!(relative_error(g.db.data(), &nb) <= 1e-4);
    }

    #[test]
    fn sigmoid_values() {
        let x = Tensor::from_vec(&[5], vec![0.0, 1.0, -3.0, 40.0, -800.0]).unwrap();
        let y = sigmoid(&x).unwrap();
        assert_eq!(y.data()[0], 0.5);
        let neg = sigmoid(&x.map(|v| -v)).unwrap();
        for (a, b) in y.data().iter().zip(neg.data()) {
            assert!((a + b - 1.0).abs() <= 1e-12);
            assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn activation_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 6], &mut rng).map(|v| 3.0 * v);
        let proj = random(&[2, 6], &mut rng);
        let dot = |t: &Tensor| t.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>();
        let s = sigmoid(&x).unwrap();
        let ds = sigmoid_backward(&s, &proj).unwrap();
        let ns = central_difference(x.data(), 1e-4, |v| dot(&sigmoid(&Tensor::from_vec(&[2, 6], v.to_vec()).unwrap()).unwrap()));
        assert!(relative_error(ds.data(), &ns) <= 1e-4);
        let t = tanh(&x).unwrap();
        let dt = tanh_backward(&t, &proj).unwrap();
        let nt = central_difference(x.data(), 1e-4, |v| dot(&tanh(&Tensor::from_vec(&[2, 6], v.to_vec()).unwrap()).unwrap()));
        assert!(relative_error(dt.data(), &nt) <= 1e-4);
    }

    #[test]
    fn gate_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(&[2, 6, 5], &mut rng);
        let proj = random(&[2, 3, 5], &mut rng);
        let f = |t: &Tensor| {
            let (y, _) = gate_forward(t).unwrap();
            y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = gate_forward(&a).unwrap();
        let da = gate_backward(&cache, &proj).unwrap();
        let na = central_difference(a.data(), 1e-4, |v| f(&Tensor::from_vec(&[2, 6, 5], v.to_vec()).unwrap()));
        assert!(relative_error(da.data(), &na) <= 1e-4);
    }

    #[test]
    fn mse_values_and_gradient() {
        let t = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        let shifted = t.map(|v| v + 1.0);
        assert_eq!(mse_loss(&shifted, &t).unwrap().0, 1.0);
        let (_, g) = mse_loss(&shifted, &t).unwrap();
        let n = central_difference(shifted.data(), 1e-4, |v| {
            mse_loss(&Tensor::from_vec(&[2, 2], v.to_vec()).unwrap(), &t).unwrap().0
        });
        assert!(relative_error(g.data(), &n) <= 1e-4);
        assert!(mse_loss(&t, &Tensor::zeros(&[4])).is_err());
    }
}
