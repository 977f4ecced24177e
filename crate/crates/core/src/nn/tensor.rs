use crate::error::{Error, Result};

/// Dense row-major `f64` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::from_vec(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_shape(other.shape(), "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Fails with a numeric error naming `op` if any entry is NaN or infinite.
    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::numeric(op, format!("non-finite value at flat index {i}"))),
            None => Ok(()),
        }
    }

    /// Slice of channel `c` of item `b` in a `[batch, channels, time]` tensor.
    pub fn lane(&self, b: usize, c: usize) -> &[f64] {
        let (ch, t) = (self.shape[1], self.shape[2]);
        let start = (b * ch + c) * t;
        &self.data[start..start + t]
    }

    pub fn lane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let (ch, t) = (self.shape[1], self.shape[2]);
        let start = (b * ch + c) * t;
        &mut self.data[start..start + t]
    }

    /// Channels `[from, to)` of a `[batch, channels, time]` tensor.
    pub fn channels(&self, from: usize, to: usize) -> Tensor {
        let (b, t) = (self.shape[0], self.shape[2]);
        let mut out = Tensor::zeros(&[b, to - from, t]);
        for bi in 0..b {
            for c in from..to {
                out.lane_mut(bi, c - from).copy_from_slice(self.lane(bi, c));
            }
        }
        out
    }

    /// Concatenates two `[batch, *, time]` tensors along the channel axis.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.shape.len() != 3 || b.shape.len() != 3 || a.shape[0] != b.shape[0] || a.shape[2] != b.shape[2] {
            return Err(Error::Shape(format!(
                "cannot concatenate {:?} and {:?} on channels",
                a.shape, b.shape
            )));
        }
        let (n, ca, cb, t) = (a.shape[0], a.shape[1], b.shape[1], a.shape[2]);
        let mut out = Tensor::zeros(&[n, ca + cb, t]);
        for bi in 0..n {
            for c in 0..ca {
                out.lane_mut(bi, c).copy_from_slice(a.lane(bi, c));
            }
            for c in 0..cb {
                out.lane_mut(bi, ca + c).copy_from_slice(b.lane(bi, c));
            }
        }
        Ok(out)
    }
}
