//! Closed-form parameter and FLOP counts.
//!
//! FLOP convention: one multiply-add is 2 FLOPs. Bias additions are not
//! counted. Per-element constants for nonlinearities are listed below.

use serde::Serialize;

use crate::baselines::CarafeConfig;
use crate::dysample::{DySampleConfig, OffsetStyle, ScopeMode, Variant};
use crate::error::{Error, Result};
use crate::tensor::{Element, Shape};
use crate::upsampler::{OpKind, Upsampler};

/// A bilinear blend reads 4 neighbors: 4 multiply-adds per output element.
pub const BLEND_FLOPS: u64 = 8;
/// exp, add, divide, negate.
pub const SIGMOID_FLOPS: u64 = 4;
/// subtract max, exp, accumulate, divide.
pub const SOFTMAX_FLOPS: u64 = 4;

/// Named cost terms of one operator; the total is their sum.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FlopBreakdown {
    pub terms: Vec<(String, u64)>,
}

impl FlopBreakdown {
    fn push(&mut self, name: &str, flops: u64) {
        self.terms.push((name.to_string(), flops));
    }

    pub fn total(&self) -> u64 {
        self.terms.iter().map(|(_, f)| f).sum()
    }

    pub fn term(&self, name: &str) -> u64 {
        self.terms.iter().filter(|(n, _)| n == name).map(|(_, f)| f).sum()
    }

    /// Cost of combining input values into output values, excluding any
    /// kernel or offset prediction.
    pub fn reassembly(&self) -> u64 {
        self.term("reassembly")
    }
}

/// `2 · c_in · c_out · k² · h_out · w_out` (per batch element, times `n`).
pub fn conv_flops(n: usize, c_in: usize, c_out: usize, k: usize, h_out: usize, w_out: usize) -> u64 {
    2 * (n * c_in * c_out * k * k * h_out * w_out) as u64
}

/// Parameter count of an operator, from its configuration.
pub fn count_params_for(kind: OpKind, channels: usize, scale: usize) -> Result<u64> {
    let c = channels as u64;
    let s2 = (scale * scale) as u64;
    Ok(match kind {
        OpKind::Nearest | OpKind::Bilinear => 0,
        OpKind::Deconv => {
            if scale != 2 {
                return Err(Error::invalid("deconv upsampler supports scale 2 only"));
            }
            let k = 3;
            c * c * k * k + c
        }
        OpKind::PixelShuffle => 9 * c * s2 * c + s2 * c,
        OpKind::Carafe => carafe_params(c, &CarafeConfig { scale, ..CarafeConfig::default() }),
        OpKind::DySample(v) => dysample_params(&v.config(channels, scale)?),
    })
}

fn carafe_params(c: u64, cfg: &CarafeConfig) -> u64 {
    let mid = cfg.c_mid as u64;
    let kc = (cfg.scale * cfg.scale * cfg.k_up * cfg.k_up) as u64;
    let ke = (cfg.k_enc * cfg.k_enc) as u64;
    (c * mid + mid) + (mid * kc * ke + kc)
}

fn dysample_params(cfg: &DySampleConfig) -> u64 {
    let heads = if cfg.scope.is_dynamic() { 2 } else { 1 };
    heads * (cfg.head_in() * cfg.head_out()) as u64
}

/// Parameter count of a constructed operator.
pub fn count_params<T: Element>(op: &Upsampler<T>) -> u64 {
    match op {
        Upsampler::Nearest { .. } | Upsampler::Bilinear { .. } => 0,
        Upsampler::Deconv(d) => {
            let (ci, co, k) = (d.layer.c_in() as u64, d.layer.c_out() as u64, d.layer.kernel() as u64);
            ci * co * k * k + if d.layer.bias.is_some() { co } else { 0 }
        }
        Upsampler::PixelShuffle(p) => {
            let (ci, co, k) = (p.conv.c_in() as u64, p.conv.c_out() as u64, p.conv.kernel() as u64);
            ci * co * k * k + if p.conv.bias.is_some() { co } else { 0 }
        }
        Upsampler::Carafe(cf) => carafe_params(cf.channels() as u64, cf.config()),
        Upsampler::DySample(m) => {
            let mut n = dysample_params(m.config());
            if m.offset_head.bias.is_some() {
                n += m.offset_head.c_out() as u64;
            }
            if let Some(b) = m.scope_head.as_ref().and_then(|h| h.bias.as_ref()) {
                n += b.len() as u64;
            }
            n
        }
    }
}

/// Parameter increment of replacing every upsampling stage of a model with `kind`.
pub fn stage_params(kind: OpKind, channels: usize, scale: usize, stages: usize) -> Result<u64> {
    Ok(count_params_for(kind, channels, scale)? * stages as u64)
}

fn dysample_flops(cfg: &DySampleConfig, input: Shape) -> FlopBreakdown {
    let Shape { n, c, h, w } = input;
    let s = cfg.scale;
    let (hh, ww) = (h * s, w * s);
    let (head_h, head_w) = match cfg.style {
        OffsetStyle::LinearThenShuffle => (h, w),
        OffsetStyle::ShuffleThenLinear => (hh, ww),
    };
    let head_elems = (n * cfg.head_out() * head_h * head_w) as u64;
    let mut f = FlopBreakdown::default();
    f.push("offset_head", conv_flops(n, cfg.head_in(), cfg.head_out(), 1, head_h, head_w));
    match cfg.scope {
        ScopeMode::Static(_) => f.push("scope", head_elems),
        ScopeMode::Dynamic(_) => {
            f.push("scope_head", conv_flops(n, cfg.head_in(), cfg.head_out(), 1, head_h, head_w));
            f.push("sigmoid", SIGMOID_FLOPS * head_elems);
            // cap multiply and elementwise product
            f.push("scope", 2 * head_elems);
        }
        ScopeMode::Tanh(_) => {
            f.push("tanh", SIGMOID_FLOPS * head_elems);
            f.push("scope", head_elems);
        }
    }
    f.push("grid", (n * 2 * cfg.groups * hh * ww) as u64);
    f.push("reassembly", BLEND_FLOPS * (n * c * hh * ww) as u64);
    f
}

fn carafe_flops(cfg: &CarafeConfig, input: Shape) -> FlopBreakdown {
    let Shape { n, c, h, w } = input;
    let s = cfg.scale;
    let kk = cfg.k_up * cfg.k_up;
    let mut f = FlopBreakdown::default();
    f.push("compress", conv_flops(n, c, cfg.c_mid, 1, h, w));
    f.push("encoder", conv_flops(n, cfg.c_mid, s * s * kk, cfg.k_enc, h, w));
    f.push("softmax", SOFTMAX_FLOPS * (n * kk * h * s * w * s) as u64);
    f.push("reassembly", 2 * (n * c * kk * h * s * w * s) as u64);
    f
}

/// Analytic FLOP count of `op` applied to an input of shape `input`.
pub fn count_flops<T: Element>(op: &Upsampler<T>, input: Shape) -> Result<FlopBreakdown> {
    let Shape { n, c, h, w } = input;
    let s = op.scale();
    let mut f = FlopBreakdown::default();
    match op {
        Upsampler::Nearest { .. } => {}
        Upsampler::Bilinear { .. } => f.push("reassembly", BLEND_FLOPS * (n * c * h * s * w * s) as u64),
        Upsampler::Deconv(d) => {
            if d.layer.c_in() != c {
                return Err(Error::shape(format!("deconv expects {} channels, got {c}", d.layer.c_in())));
            }
            f.push("deconv", conv_flops(n, c, d.layer.c_out(), d.layer.kernel(), h, w));
        }
        Upsampler::PixelShuffle(p) => {
            if p.conv.c_in() != c {
                return Err(Error::shape(format!("conv expects {} channels, got {c}", p.conv.c_in())));
            }
            f.push("conv", conv_flops(n, c, p.conv.c_out(), p.conv.kernel(), h, w));
        }
        Upsampler::Carafe(cf) => {
            if cf.channels() != c {
                return Err(Error::shape(format!("carafe expects {} channels, got {c}", cf.channels())));
            }
            return Ok(carafe_flops(cf.config(), input));
        }
        Upsampler::DySample(m) => {
            if m.config().channels != c {
                return Err(Error::shape(format!(
                    "module expects {} channels, got {c}",
                    m.config().channels
                )));
            }
            return Ok(dysample_flops(m.config(), input));
        }
    }
    Ok(f)
}

/// FLOPs of a kernel-reassembly upsampler with kernel `k_up` on `input`,
/// without building its weights.
pub fn carafe_flops_for(input: Shape, config: &CarafeConfig) -> FlopBreakdown {
    carafe_flops(config, input)
}

/// FLOPs of a DySample variant on `input`, without building its weights.
pub fn dysample_flops_for(variant: Variant, input: Shape, scale: usize) -> Result<FlopBreakdown> {
    Ok(dysample_flops(&variant.config(input.c, scale)?, input))
}
