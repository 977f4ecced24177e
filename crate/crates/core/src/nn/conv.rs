//! Non-causal dilated 1-D convolution (cross-correlation form) with
//! symmetric zero padding, so the time axis keeps its length.

use super::ops::{matmul, Transpose};
use super::Tensor;
use crate::error::{Error, Result};

fn check(x: &Tensor, kernel: &Tensor, dilation: usize) -> Result<(usize, usize, usize, usize, usize)> {
    if x.shape().len() != 3 || kernel.shape().len() != 3 {
        return Err(Error::Shape(format!(
            "conv1d: input {:?} and kernel {:?} must both be rank 3",
            x.shape(),
            kernel.shape()
        )));
    }
    let (batch, cin, time) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, kin, width) = (kernel.dim(0), kernel.dim(1), kernel.dim(2));
    if kin != cin {
        return Err(Error::Shape(format!(
            "conv1d: kernel {:?} expects {kin} input channels, input {:?} has {cin}",
            kernel.shape(),
            x.shape()
        )));
    }
    if width % 2 == 0 || dilation == 0 {
        return Err(Error::Shape(format!(
            "conv1d: kernel width {width} must be odd and dilation {dilation} positive"
        )));
    }
    Ok((batch, cin, time, cout, width))
}

/// Unrolls one batch item into a `[cin * width, time]` patch matrix.
fn im2col(x: &[f64], cin: usize, time: usize, width: usize, dilation: usize, cols: &mut [f64]) {
    let half = (width - 1) / 2;
    for c in 0..cin {
        let lane = &x[c * time..(c + 1) * time];
        for j in 0..width {
            let row = &mut cols[(c * width + j) * time..(c * width + j + 1) * time];
            let shift = j as isize - half as isize;
            let offset = shift * dilation as isize;
            for (t, v) in row.iter_mut().enumerate() {
                let src = t as isize + offset;
                *v = if src >= 0 && (src as usize) < time { lane[src as usize] } else { 0.0 };
            }
        }
    }
}

fn col2im(cols: &[f64], cin: usize, time: usize, width: usize, dilation: usize, dx: &mut [f64]) {
    let half = (width - 1) / 2;
    for c in 0..cin {
        let lane = &mut dx[c * time..(c + 1) * time];
        for j in 0..width {
            let row = &cols[(c * width + j) * time..(c * width + j + 1) * time];
            let offset = (j as isize - half as isize) * dilation as isize;
            for (t, &g) in row.iter().enumerate() {
                let dst = t as isize + offset;
                if dst >= 0 && (dst as usize) < time {
                    lane[dst as usize] += g;
                }
            }
        }
    }
}

/// `y[b, o, t] = bias[o] + sum_{c, j} kernel[o, c, j] * x[b, c, t + (j - (width-1)/2) * dilation]`.
pub fn conv1d_forward(x: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, dilation: usize) -> Result<Tensor> {
    let (batch, cin, time, cout, width) = check(x, kernel, dilation)?;
    if let Some(b) = bias {
        b.expect_shape(&[cout], "conv1d bias")?;
    }
    let mut y = Tensor::zeros(&[batch, cout, time]);
    let mut cols = if width == 1 { Vec::new() } else { vec![0.0; cin * width * time] };
    for bi in 0..batch {
        let xb = &x.data()[bi * cin * time..(bi + 1) * cin * time];
        let yb = &mut y.data_mut()[bi * cout * time..(bi + 1) * cout * time];
        if let Some(b) = bias {
            for (o, lane) in yb.chunks_exact_mut(time).enumerate() {
                lane.fill(b.data()[o]);
            }
        }
        let patches: &[f64] = if width == 1 {
            xb
        } else {
            im2col(xb, cin, time, width, dilation, &mut cols);
            &cols
        };
        matmul(kernel.data(), Transpose::No, patches, Transpose::No, cout, cin * width, time, 1.0, yb);
    }
    y.check_finite("conv1d")?;
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dkernel: Tensor,
    pub dbias: Tensor,
}

pub fn conv1d_backward(x: &Tensor, kernel: &Tensor, dy: &Tensor, dilation: usize) -> Result<ConvGrads> {
    let (batch, cin, time, cout, width) = check(x, kernel, dilation)?;
    dy.expect_shape(&[batch, cout, time], "conv1d backward")?;
    let mut dx = Tensor::zeros(&[batch, cin, time]);
    let mut dkernel = Tensor::zeros(kernel.shape());
    let mut dbias = Tensor::zeros(&[cout]);
    let mut cols = vec![0.0; cin * width * time];
    let mut dcols = vec![0.0; cin * width * time];
    for bi in 0..batch {
        let xb = &x.data()[bi * cin * time..(bi + 1) * cin * time];
        let dyb = &dy.data()[bi * cout * time..(bi + 1) * cout * time];
        for (o, lane) in dyb.chunks_exact(time).enumerate() {
            dbias.data_mut()[o] += lane.iter().sum::<f64>();
        }
        let patches: &[f64] = if width == 1 {
            xb
        } else {
            im2col(xb, cin, time, width, dilation, &mut cols);
            &cols
        };
        matmul(dyb, Transpose::No, patches, Transpose::Yes, cout, time, cin * width, 1.0, dkernel.data_mut());
        let dxb = &mut dx.data_mut()[bi * cin * time..(bi + 1) * cin * time];
        if width == 1 {
            matmul(kernel.data(), Transpose::Yes, dyb, Transpose::No, cin, cout, time, 1.0, dxb);
        } else {
            matmul(kernel.data(), Transpose::Yes, dyb, Transpose::No, cin * width, cout, time, 0.0, &mut dcols);
            col2im(&dcols, cin, time, width, dilation, dxb);
        }
    }
    Ok(ConvGrads { dx, dkernel, dbias })
}
