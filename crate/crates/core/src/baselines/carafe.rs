//! Kernel-reassembly upsampler.
//!
//! Pipeline: 1×1 channel compression, a `k_enc` convolution predicting
//! `s²·k_up²` kernel logits per low-res pixel, pixel shuffle to one
//! `k_up²` kernel per output pixel, softmax normalization, and finally a
//! weighted sum over the `k_up × k_up` neighborhood of each output pixel's
//! source pixel (zero padded).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layers::{softmax_channels, softmax_channels_backward, Conv2dLayer, ConvGrads, LinearGrads, LinearLayer};
use crate::tensor::{Element, Rng, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CarafeConfig {
    pub k_up: usize,
    pub k_enc: usize,
    pub c_mid: usize,
    pub scale: usize,
}

impl Default for CarafeConfig {
    fn default() -> Self {
        CarafeConfig {
            k_up: 5,
            k_enc: 3,
            c_mid: 64,
            scale: 2,
        }
    }
}

impl CarafeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_up % 2 == 0 || self.k_enc % 2 == 0 {
            return Err(Error::invalid(format!(
                "kernel sizes must be odd (k_up={}, k_enc={})",
                self.k_up, self.k_enc
            )));
        }
        if self.c_mid == 0 || self.scale == 0 {
            return Err(Error::invalid("c_mid and scale must be >= 1"));
        }
        Ok(())
    }

    pub fn kernel_channels(&self) -> usize {
        self.k_up * self.k_up
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Carafe<T = f64> {
    config: CarafeConfig,
    pub compress: LinearLayer<T>,
    pub encoder: Conv2dLayer<T>,
}

#[derive(Clone, Debug)]
pub struct CarafeGrads<T = f64> {
    pub x: Tensor<T>,
    pub compress: LinearGrads<T>,
    pub encoder: ConvGrads<T>,
}

impl<T: Element> CarafeGrads<T> {
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = self.compress.params();
        out.extend(self.encoder.params());
        out
    }
}

impl<T: Element> Carafe<T> {
    /// Fan-in initialized layers with biases.
    pub fn new(channels: usize, config: CarafeConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let s = config.scale;
        Ok(Carafe {
            config,
            compress: LinearLayer::fan_in(channels, config.c_mid, true, rng)?,
            encoder: Conv2dLayer::fan_in(
                config.c_mid,
                s * s * config.kernel_channels(),
                config.k_enc,
                1,
                config.k_enc / 2,
                true,
                rng,
            )?,
        })
    }

    pub fn config(&self) -> &CarafeConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.compress.c_in()
    }

    pub fn param_count(&self) -> usize {
        self.compress.param_count() + self.encoder.param_count()
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out = self.compress.parameters();
        out.extend(self.encoder.parameters());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.compress.parameters_mut();
        out.extend(self.encoder.parameters_mut());
        out
    }

    /// Normalized reassembly kernels, shape `(n, k_up², s·h, s·w)`.
    pub fn kernels(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let logits = self.encoder.forward(&self.compress.forward(x)?)?;
        softmax_channels(&logits.pixel_shuffle(self.config.scale)?, self.config.kernel_channels())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        reassemble(x, &self.kernels(x)?, self.config.k_up, self.config.scale)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<CarafeGrads<T>> {
        let cfg = self.config;
        let z = self.compress.forward(x)?;
        let logits = self.encoder.forward(&z)?;
        let kernels = softmax_channels(&logits.pixel_shuffle(cfg.scale)?, cfg.kernel_channels())?;
        let (grad_x_direct, grad_kernels) = reassemble_backward(x, &kernels, grad_out, cfg.k_up, cfg.scale)?;
        let grad_logits = softmax_channels_backward(&kernels, &grad_kernels, cfg.kernel_channels())?
            .pixel_unshuffle(cfg.scale)?;
        let encoder = self.encoder.backward(&z, &grad_logits)?;
        let compress = self.compress.backward(x, &encoder.x)?;
        let grad_x = grad_x_direct.add(&compress.x)?;
        Ok(CarafeGrads {
            x: grad_x,
            compress,
            encoder,
        })
    }
}

fn check_reassembly<T: Element>(x: &Tensor<T>, kernels: &Tensor<T>, k_up: usize, s: usize) -> Result<Shape> {
    let xs = x.shape();
    let ks = kernels.shape();
    let want = Shape::new(xs.n, k_up * k_up, xs.h * s, xs.w * s)?;
    if ks != want {
        return Err(Error::shape(format!("reassembly kernels must be {want}, got {ks}")));
    }
    Shape::new(xs.n, xs.c, xs.h * s, xs.w * s)
}

/// `out[c, i, j] = Σ_{u,v} K[u·k+v, i, j] · x[c, ⌊i/s⌋+u−r, ⌊j/s⌋+v−r]`, zero outside.
pub fn reassemble<T: Element>(x: &Tensor<T>, kernels: &Tensor<T>, k_up: usize, s: usize) -> Result<Tensor<T>> {
    let os = check_reassembly(x, kernels, k_up, s)?;
    let xs = x.shape();
    let r = (k_up / 2) as isize;
    let mut out = Tensor::zeros(os);
    out.data_mut()
        .par_chunks_mut(os.plane())
        .enumerate()
        .for_each(|(idx, dst)| {
            let (b, c) = (idx / xs.c, idx % xs.c);
            let src = x.plane(b, c);
            for u in 0..k_up {
                for v in 0..k_up {
                    let kplane = kernels.plane(b, u * k_up + v);
                    let dy = u as isize - r;
                    let dx = v as isize - r;
                    for i in 0..os.h {
                        let sy = (i / s) as isize + dy;
                        if sy < 0 || sy >= xs.h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * xs.w..(sy as usize + 1) * xs.w];
                        let krow = &kplane[i * os.w..(i + 1) * os.w];
                        let orow = &mut dst[i * os.w..(i + 1) * os.w];
                        for j in 0..os.w {
                            let sx = (j / s) as isize + dx;
                            if sx >= 0 && sx < xs.w as isize {
                                orow[j] += krow[j] * srow[sx as usize];
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of [`reassemble`] with respect to the feature and the kernels.
pub fn reassemble_backward<T: Element>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    k_up: usize,
    s: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let os = check_reassembly(x, kernels, k_up, s)?;
    if grad_out.shape() != os {
        return Err(Error::shape(format!(
            "reassembly backward: grad_out {} does not match output {os}",
            grad_out.shape()
        )));
    }
    let xs = x.shape();
    let r = (k_up / 2) as isize;
    let kk = k_up * k_up;

    let mut grad_x = Tensor::zeros(xs);
    grad_x
        .data_mut()
        .par_chunks_mut(xs.plane())
        .enumerate()
        .for_each(|(idx, dst)| {
            let (b, c) = (idx / xs.c, idx % xs.c);
            let g = grad_out.plane(b, c);
            for u in 0..k_up {
                for v in 0..k_up {
                    let kplane = kernels.plane(b, u * k_up + v);
                    let (dy, dx) = (u as isize - r, v as isize - r);
                    for i in 0..os.h {
                        let sy = (i / s) as isize + dy;
                        if sy < 0 || sy >= xs.h as isize {
                            continue;
                        }
                        for j in 0..os.w {
                            let sx = (j / s) as isize + dx;
                            if sx >= 0 && sx < xs.w as isize {
                                let p = i * os.w + j;
                                dst[sy as usize * xs.w + sx as usize] += kplane[p] * g[p];
                            }
                        }
                    }
                }
            }
        });

    let mut grad_k = Tensor::zeros(kernels.shape());
    grad_k
        .data_mut()
        .par_chunks_mut(os.plane())
        .enumerate()
        .for_each(|(idx, dst)| {
            let (b, uv) = (idx / kk, idx % kk);
            let (dy, dx) = ((uv / k_up) as isize - r, (uv % k_up) as isize - r);
            for c in 0..xs.c {
                let src = x.plane(b, c);
                let g = grad_out.plane(b, c);
                for i in 0..os.h {
                    let sy = (i / s) as isize + dy;
                    if sy < 0 || sy >= xs.h as isize {
                        continue;
                    }
                    for j in 0..os.w {
                        let sx = (j / s) as isize + dx;
                        if sx >= 0 && sx < xs.w as isize {
                            let p = i * os.w + j;
                            dst[p] += g[p] * src[sy as usize * xs.w + sx as usize];
                        }
                    }
                }
            }
        });
    Ok((grad_x, grad_k))
}
