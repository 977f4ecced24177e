//! Flow mechanics: grouping, affine coupling, invertible 1x1 mixing and
//! their composition. Each flow step is a coupling followed by a mix.

use super::wn::{self, WnCache, WnNames};
use super::FlowConfig;
use crate::error::{Error, Result};
use crate::nn::linalg::Lu;
use crate::nn::{matmul, ParamSet, Tensor, Transpose};

/// Smallest coupling scale the inverse accepts.
pub const MIN_SCALE: f64 = 1e-12;

/// Groups equally long signals into `[batch, group, ceil(len/group)]`,
/// zero-padding the tail. Returns the padding so [`unsqueeze`] can strip it.
pub fn squeeze(batch: &[&[f64]], group: usize) -> Result<(Tensor, usize)> {
    if group == 0 {
        return Err(Error::Parameter("group must be positive".into()));
    }
    let len = batch.first().map_or(0, |s| s.len());
    if let Some(bad) = batch.iter().find(|s| s.len() != len) {
        return Err(Error::Shape(format!("batch mixes lengths {len} and {}", bad.len())));
    }
    let steps = len.div_ceil(group);
    let pad = steps * group - len;
    let mut out = Tensor::zeros(&[batch.len(), group, steps]);
    for (b, signal) in batch.iter().enumerate() {
        for (s, &v) in signal.iter().enumerate() {
            out.lane_mut(b, s % group)[s / group] = v;
        }
    }
    Ok((out, pad))
}

/// Inverse of [`squeeze`].
pub fn unsqueeze(x: &Tensor, pad: usize) -> Result<Vec<Vec<f64>>> {
    if x.shape().len() != 3 {
        return Err(Error::Shape(format!("expected [batch, group, time], got {:?}", x.shape())));
    }
    let (n, group, steps) = (x.dim(0), x.dim(1), x.dim(2));
    let len = (group * steps)
        .checked_sub(pad)
        .ok_or_else(|| Error::Shape(format!("padding {pad} exceeds {} samples", group * steps)))?;
    Ok((0..n)
        .map(|b| (0..len).map(|s| x.lane(b, s % group)[s / group]).collect())
        .collect())
}

pub(crate) fn w_name(flow: usize) -> String {
    format!("vocoder.flow{flow}.W")
}

/// `y[:, :, t] = W x[:, :, t]`.
pub fn mix(w: &[f64], x: &Tensor) -> Result<Tensor> {
    let (n, g, t) = (x.dim(0), x.dim(1), x.dim(2));
    if w.len() != g * g {
        return Err(Error::Shape(format!("mixing matrix of {} entries for {g} channels", w.len())));
    }
    let mut y = Tensor::zeros(x.shape());
    let stride = g * t;
    for b in 0..n {
        let xb = &x.data()[b * stride..(b + 1) * stride];
        matmul(w, Transpose::No, xb, Transpose::No, g, g, t, 0.0, &mut y.data_mut()[b * stride..(b + 1) * stride]);
    }
    Ok(y)
}

/// Mix plus its log-determinant, `time * batch * log|det W|`.
pub fn inv_conv_forward(w: &[f64], x: &Tensor) -> Result<(Tensor, f64)> {
    let lu = Lu::new(w, x.dim(1))?;
    if lu.is_singular() {
        return Err(Error::numeric("inv_conv_forward", "singular mixing matrix"));
    }
    let logdet = (x.dim(0) * x.dim(2)) as f64 * lu.log_abs_det();
    Ok((mix(w, x)?, logdet))
}

pub fn inv_conv_inverse(w: &[f64], y: &Tensor) -> Result<Tensor> {
    let lu = Lu::new(w, y.dim(1))?;
    if lu.is_singular() {
        return Err(Error::numeric("inv_conv_inverse", "singular mixing matrix"));
    }
    mix(&lu.inverse()?, y)
}

pub(crate) struct CouplingCache {
    x: Tensor,
    scale: Tensor,
    wn: WnCache,
}

fn split_scale_shift(out: &Tensor, half: usize) -> (Tensor, Tensor) {
    (out.channels(0, half), out.channels(half, 2 * half))
}

/// Affine coupling of flow `flow`. Returns the output and `sum(log s)`.
pub(crate) fn coupling_forward(
    cfg: &FlowConfig,
    params: &ParamSet,
    flow: usize,
    x: &Tensor,
    cond: &Tensor,
) -> Result<(Tensor, f64, CouplingCache)> {
    let half = cfg.group / 2;
    let names = WnNames::new(flow, cfg.wn_layers);
    let x0 = x.channels(0, half);
    let (out, wn_cache) = wn::forward(&names, cfg, params, &x0, cond)?;
    out.check_finite("coupling_forward")?;
    let (log_s, shift) = split_scale_shift(&out, half);
    let scale = log_s.map(f64::exp);
    let mut y1 = x.channels(half, 2 * half);
    for ((v, s), t) in y1.data_mut().iter_mut().zip(scale.data()).zip(shift.data()) {
        *v = s * *v + t;
    }
    let y = Tensor::concat_channels(&x0, &y1)?;
    Ok((
        y,
        log_s.sum(),
        CouplingCache {
            x: x.clone(),
            scale,
            wn: wn_cache,
        },
    ))
}

pub(crate) fn coupling_inverse(
    cfg: &FlowConfig,
    params: &ParamSet,
    flow: usize,
    y: &Tensor,
    cond: &Tensor,
) -> Result<Tensor> {
    let half = cfg.group / 2;
    let names = WnNames::new(flow, cfg.wn_layers);
    let x0 = y.channels(0, half);
    let (out, _) = wn::forward(&names, cfg, params, &x0, cond)?;
    out.check_finite("coupling_inverse")?;
    let (log_s, shift) = split_scale_shift(&out, half);
    let mut x1 = y.channels(half, 2 * half);
    for ((v, ls), t) in x1.data_mut().iter_mut().zip(log_s.data()).zip(shift.data()) {
        let s = ls.exp();
        if s.abs() < MIN_SCALE {
            return Err(Error::numeric("coupling_inverse", format!("scale {s:e} too small to invert")));
        }
        *v = (*v - t) / s;
    }
    Tensor::concat_channels(&x0, &x1)
}

/// Backward through one coupling. `dlogdet` is the loss gradient with
/// respect to the coupling's `sum(log s)`.
fn coupling_backward(
    cfg: &FlowConfig,
    params: &mut ParamSet,
    flow: usize,
    cache: &CouplingCache,
    dy: &Tensor,
    dlogdet: f64,
) -> Result<Tensor> {
    let half = cfg.group / 2;
    let names = WnNames::new(flow, cfg.wn_layers);
    let dy0 = dy.channels(0, half);
    let dy1 = dy.channels(half, 2 * half);
    let x1 = cache.x.channels(half, 2 * half);
    let mut dx1 = dy1.clone();
    let mut dlog_s = dy1.clone();
    for (i, ((d, s), x)) in dy1.data().iter().zip(cache.scale.data()).zip(x1.data()).enumerate() {
        dx1.data_mut()[i] = d * s;
        dlog_s.data_mut()[i] = d * s * x + dlogdet;
    }
    let d_out = Tensor::concat_channels(&dlog_s, &dy1)?;
    let mut dx0 = wn::backward(&names, cfg, params, &cache.wn, &d_out)?;
    dx0.add_assign(&dy0)?;
    Tensor::concat_channels(&dx0, &dx1)
}

/// `dx = W^T dy`, `dW += dy x^T + dlogdet * batch * time * W^{-T}`.
fn inv_conv_backward(
    params: &mut ParamSet,
    flow: usize,
    x: &Tensor,
    dy: &Tensor,
    dlogdet: f64,
) -> Result<Tensor> {
    let name = w_name(flow);
    let (n, g, t) = (x.dim(0), x.dim(1), x.dim(2));
    let w = params.value(&name)?.data().to_vec();
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = vec![0.0; g * g];
    let stride = g * t;
    for b in 0..n {
        let xb = &x.data()[b * stride..(b + 1) * stride];
        let dyb = &dy.data()[b * stride..(b + 1) * stride];
        matmul(&w, Transpose::Yes, dyb, Transpose::No, g, g, t, 0.0, &mut dx.data_mut()[b * stride..(b + 1) * stride]);
        matmul(dyb, Transpose::No, xb, Transpose::Yes, g, t, g, 1.0, &mut dw);
    }
    let inv = Lu::new(&w, g)?.inverse()?;
    let coef = dlogdet * (n * t) as f64;
    for i in 0..g {
        for j in 0..g {
            dw[i * g + j] += coef * inv[j * g + i];
        }
    }
    params.accumulate(&name, &Tensor::from_vec(&[g, g], dw)?)?;
    Ok(dx)
}

pub(crate) struct FlowCache {
    couplings: Vec<CouplingCache>,
    mix_inputs: Vec<Tensor>,
}

/// Runs every flow step; returns `z` and the total log-determinant summed
/// over the batch.
pub(crate) fn flow_forward(
    cfg: &FlowConfig,
    params: &ParamSet,
    x: &Tensor,
    cond: &Tensor,
) -> Result<(Tensor, f64, FlowCache)> {
    let mut h = x.clone();
    let mut logdet = 0.0;
    let mut cache = FlowCache {
        couplings: Vec::with_capacity(cfg.n_flows),
        mix_inputs: Vec::with_capacity(cfg.n_flows),
    };
    for k in 0..cfg.n_flows {
        let (y, ld, cc) = coupling_forward(cfg, params, k, &h, cond)?;
        let (z, ld_w) = inv_conv_forward(params.value(&w_name(k))?.data(), &y)?;
        logdet += ld + ld_w;
        cache.couplings.push(cc);
        cache.mix_inputs.push(y);
        h = z;
    }
    Ok((h, logdet, cache))
}

pub(crate) fn flow_inverse(cfg: &FlowConfig, params: &ParamSet, z: &Tensor, cond: &Tensor) -> Result<Tensor> {
    let mut h = z.clone();
    for k in (0..cfg.n_flows).rev() {
        let y = inv_conv_inverse(params.value(&w_name(k))?.data(), &h)?;
        h = coupling_inverse(cfg, params, k, &y, cond)?;
    }
    h.check_finite("flow_inverse")?;
    Ok(h)
}

/// Accumulates parameter gradients given `dL/dz` and `dL/dlogdet`.
pub(crate) fn flow_backward(
    cfg: &FlowConfig,
    params: &mut ParamSet,
    cache: &FlowCache,
    dz: &Tensor,
    dlogdet: f64,
) -> Result<Tensor> {
    let mut d = dz.clone();
    for k in (0..cfg.n_flows).rev() {
        let dy = inv_conv_backward(params, k, &cache.mix_inputs[k], &d, dlogdet)?;
        d = coupling_backward(cfg, params, k, &cache.couplings[k], &dy, dlogdet)?;
    }
    Ok(d)
}

/// Per-sample negative log-likelihood of `z` under `N(0, sigma^2)` given
/// the total log-determinant, plus `dL/dz` and `dL/dlogdet`.
pub(crate) fn gaussian_nll(z: &Tensor, logdet: f64, sigma: f64) -> (f64, Tensor, f64) {
    let n = z.len() as f64;
    let var = sigma * sigma;
    let sq: f64 = z.data().iter().map(|v| v * v).sum();
    let log_norm = 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let loss = (sq / (2.0 * var) - logdet) / n + log_norm;
    let dz = z.map(|v| v / (var * n));
    (loss, dz, -1.0 / n)
}
