//! Conditioner network producing `(log s, t)` for one affine coupling.
//!
//! A stack of non-causal dilated convolutions with gated `tanh * sigmoid`
//! units, residual and skip paths, and a per-layer 1x1 projection of the
//! Mel conditioning. Dilation doubles per layer. The final 1x1 projection
//! starts at zero so an untrained coupling is the identity.

use rand::Rng;

use super::FlowConfig;
use crate::error::Result;
use crate::nn::{
    conv1d_backward, conv1d_forward, gate_backward, gate_forward, uniform_init, xavier_limit, GateCache,
    ParamSet, Tensor,
};

pub(crate) struct WnNames {
    start_w: String,
    start_b: String,
    in_w: Vec<String>,
    in_b: Vec<String>,
    cond_w: Vec<String>,
    rs_w: Vec<String>,
    rs_b: Vec<String>,
    end_w: String,
    end_b: String,
}

impl WnNames {
    pub(crate) fn new(flow: usize, layers: usize) -> Self {
        let p = format!("vocoder.flow{flow}.wn");
        let per = |tag: &str| (0..layers).map(|l| format!("{p}.{tag}{l}")).collect::<Vec<_>>();
        WnNames {
            start_w: format!("{p}.start.w"),
            start_b: format!("{p}.start.b"),
            in_w: per("in").into_iter().map(|s| s + ".w").collect(),
            in_b: per("in").into_iter().map(|s| s + ".b").collect(),
            cond_w: per("cond").into_iter().map(|s| s + ".w").collect(),
            rs_w: per("rs").into_iter().map(|s| s + ".w").collect(),
            rs_b: per("rs").into_iter().map(|s| s + ".b").collect(),
            end_w: format!("{p}.end.w"),
            end_b: format!("{p}.end.b"),
        }
    }

    /// Every tensor name with its shape.
    pub(crate) fn shapes(&self, cfg: &FlowConfig) -> Vec<(String, Vec<usize>)> {
        let (c, half, k, f, g) = (cfg.wn_channels, cfg.group / 2, cfg.kernel_size, cfg.n_mels, cfg.group);
        let mut out = vec![
            (self.start_w.clone(), vec![c, half, 1]),
            (self.start_b.clone(), vec![c]),
        ];
        for l in 0..cfg.wn_layers {
            let rs_out = if l + 1 == cfg.wn_layers { c } else { 2 * c };
            out.push((self.in_w[l].clone(), vec![2 * c, c, k]));
            out.push((self.in_b[l].clone(), vec![2 * c]));
            out.push((self.cond_w[l].clone(), vec![2 * c, f, 1]));
            out.push((self.rs_w[l].clone(), vec![rs_out, c, 1]));
            out.push((self.rs_b[l].clone(), vec![rs_out]));
        }
        out.push((self.end_w.clone(), vec![g, c, 1]));
        out.push((self.end_b.clone(), vec![g]));
        out
    }

    pub(crate) fn init<R: Rng + ?Sized>(&self, cfg: &FlowConfig, params: &mut ParamSet, rng: &mut R) -> Result<()> {
        for (name, shape) in self.shapes(cfg) {
            let is_bias = shape.len() == 1;
            let t = if is_bias || name == self.end_w {
                Tensor::zeros(&shape)
            } else {
                let fan_in = shape[1] * shape[2];
                let fan_out = shape[0] * shape[2];
                uniform_init(&shape, xavier_limit(fan_in, fan_out), rng)
            };
            params.insert(name, t)?;
        }
        Ok(())
    }
}

pub(crate) struct WnCache {
    x0: Tensor,
    cond: Tensor,
    hidden: Vec<Tensor>,
    gated: Vec<Tensor>,
    gates: Vec<GateCache>,
    skip: Tensor,
}

fn dilation(layer: usize) -> usize {
    1 << layer
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    for (a, b) in dst.data_mut().iter_mut().zip(src.data()) {
        *a += b;
    }
}

/// Returns `[batch, group, time]`: `log s` in the first half of the
/// channels, `t` in the second.
pub(crate) fn forward(
    names: &WnNames,
    cfg: &FlowConfig,
    params: &ParamSet,
    x0: &Tensor,
    cond: &Tensor,
) -> Result<(Tensor, WnCache)> {
    let c = cfg.wn_channels;
    let mut h = conv1d_forward(x0, params.value(&names.start_w)?, Some(params.value(&names.start_b)?), 1)?;
    let mut skip = Tensor::zeros(&[x0.dim(0), c, x0.dim(2)]);
    let mut hidden = Vec::with_capacity(cfg.wn_layers);
    let mut gated = Vec::with_capacity(cfg.wn_layers);
    let mut gates = Vec::with_capacity(cfg.wn_layers);
    for l in 0..cfg.wn_layers {
        let mut a = conv1d_forward(&h, params.value(&names.in_w[l])?, Some(params.value(&names.in_b[l])?), dilation(l))?;
        add_into(&mut a, &conv1d_forward(cond, params.value(&names.cond_w[l])?, None, 1)?);
        let (g, gate_cache) = gate_forward(&a)?;
        let r = conv1d_forward(&g, params.value(&names.rs_w[l])?, Some(params.value(&names.rs_b[l])?), 1)?;
        hidden.push(h.clone());
        if l + 1 < cfg.wn_layers {
            add_into(&mut h, &r.channels(0, c));
            add_into(&mut skip, &r.channels(c, 2 * c));
        } else {
            add_into(&mut skip, &r);
        }
        gated.push(g);
        gates.push(gate_cache);
    }
    let out = conv1d_forward(&skip, params.value(&names.end_w)?, Some(params.value(&names.end_b)?), 1)?;
    Ok((
        out,
        WnCache {
            x0: x0.clone(),
            cond: cond.clone(),
            hidden,
            gated,
            gates,
            skip,
        },
    ))
}

/// Accumulates parameter gradients and returns the gradient for `x0`.
pub(crate) fn backward(
    names: &WnNames,
    cfg: &FlowConfig,
    params: &mut ParamSet,
    cache: &WnCache,
    d_out: &Tensor,
) -> Result<Tensor> {
    let end = conv1d_backward(&cache.skip, params.value(&names.end_w)?, d_out, 1)?;
    params.accumulate(&names.end_w, &end.dkernel)?;
    params.accumulate(&names.end_b, &end.dbias)?;
    let d_skip = end.dx;
    let mut d_h: Option<Tensor> = None;
    for l in (0..cfg.wn_layers).rev() {
        let d_r = match &d_h {
            None => d_skip.clone(),
            Some(dh) => Tensor::concat_channels(dh, &d_skip)?,
        };
        let rs = conv1d_backward(&cache.gated[l], params.value(&names.rs_w[l])?, &d_r, 1)?;
        params.accumulate(&names.rs_w[l], &rs.dkernel)?;
        params.accumulate(&names.rs_b[l], &rs.dbias)?;
        let d_a = gate_backward(&cache.gates[l], &rs.dx)?;
        let inp = conv1d_backward(&cache.hidden[l], params.value(&names.in_w[l])?, &d_a, dilation(l))?;
        params.accumulate(&names.in_w[l], &inp.dkernel)?;
        params.accumulate(&names.in_b[l], &inp.dbias)?;
        let cond = conv1d_backward(&cache.cond, params.value(&names.cond_w[l])?, &d_a, 1)?;
        params.accumulate(&names.cond_w[l], &cond.dkernel)?;
        let mut next = inp.dx;
        if let Some(dh) = &d_h {
            add_into(&mut next, dh);
        }
        d_h = Some(next);
    }
    let d_h0 = d_h.expect("at least one layer");
    let start = conv1d_backward(&cache.x0, params.value(&names.start_w)?, &d_h0, 1)?;
    params.accumulate(&names.start_w, &start.dkernel)?;
    params.accumulate(&names.start_b, &start.dbias)?;
    Ok(start.dx)
}
