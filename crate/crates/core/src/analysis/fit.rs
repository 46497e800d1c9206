//! A toy upsampling task: recover a piecewise-constant high-resolution map
//! from its box-downsampled version.

use serde::Serialize;

use crate::baselines::bilinear_upsample;
use crate::dysample::DySampleModule;
use crate::error::{Error, Result};
use crate::layers::sgd_step;
use crate::tensor::{Rng, Shape, Tensor};

/// Learning rate used when none is given.
pub const DEFAULT_FIT_LR: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct EdgeTask {
    pub input: Tensor,
    pub target: Tensor,
    pub scale: usize,
}

impl EdgeTask {
    /// `channels` maps of `size × size` pixels split by three random lines into
    /// constant regions, with independent per-channel region values.
    pub fn generate(channels: usize, size: usize, scale: usize, seed: u64) -> Result<Self> {
        if scale == 0 || size % scale != 0 {
            return Err(Error::invalid(format!("size {size} must be a multiple of scale {scale}")));
        }
        let mut rng = Rng::new(seed);
        let lines: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let theta = rng.uniform(0.0, std::f64::consts::PI);
                let cx = rng.uniform(0.25, 0.75) * size as f64;
                let cy = rng.uniform(0.25, 0.75) * size as f64;
                let (nx, ny) = (theta.cos(), theta.sin());
                (nx, ny, -(nx * cx + ny * cy))
            })
            .collect();
        let regions = 1 << lines.len();
        let values: Vec<f64> = (0..channels * regions).map(|_| rng.normal()).collect();
        let shape = Shape::new(1, channels, size, size)?;
        let mut target = Tensor::zeros(shape);
        for i in 0..size {
            for j in 0..size {
                let (x, y) = (j as f64 + 0.5, i as f64 + 0.5);
                let region = lines
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (k, &(a, b, c))| acc | (usize::from(a * x + b * y + c > 0.0) << k));
                for ch in 0..channels {
                    target.set(0, ch, i, j, values[ch * regions + region]);
                }
            }
        }
        let input = box_downsample(&target, scale)?;
        Ok(EdgeTask { input, target, scale })
    }
}

/// Mean over each `s × s` block.
pub fn box_downsample(x: &Tensor, s: usize) -> Result<Tensor> {
    let xs = x.shape();
    if s == 0 || xs.h % s != 0 || xs.w % s != 0 {
        return Err(Error::shape(format!("{xs} is not divisible by {s}")));
    }
    let mut out = Tensor::zeros(Shape::new(xs.n, xs.c, xs.h / s, xs.w / s)?);
    let norm = 1.0 / (s * s) as f64;
    for n in 0..xs.n {
        for c in 0..xs.c {
            for i in 0..xs.h / s {
                for j in 0..xs.w / s {
                    let mut acc = 0.0;
                    for u in 0..s {
                        for v in 0..s {
                            acc += x.at(n, c, i * s + u, j * s + v);
                        }
                    }
                    out.set(n, c, i, j, acc * norm);
                }
            }
        }
    }
    Ok(out)
}

pub fn mse(y: &Tensor, target: &Tensor) -> Result<f64> {
    let d = y.sub(target)?;
    Ok(d.dot(&d)? / d.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    /// Loss before each step, then the final loss.
    pub losses: Vec<f64>,
    pub bilinear_mse: f64,
    pub lr: f64,
}

impl FitReport {
    pub fn initial(&self) -> f64 {
        self.losses[0]
    }

    pub fn last(&self) -> f64 {
        *self.losses.last().expect("losses always include the initial value")
    }
}

/// Plain gradient descent on the mean squared error.
pub fn toy_fit(module: &mut DySampleModule, task: &EdgeTask, steps: usize, lr: f64) -> Result<FitReport> {
    if module.scale() != task.scale {
        return Err(Error::invalid(format!(
            "module scale {} does not match task scale {}",
            module.scale(),
            task.scale
        )));
    }
    let bilinear_mse = mse(&bilinear_upsample(&task.input, task.scale)?, &task.target)?;
    let mut losses = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let y = module.forward(&task.input)?;
        let diff = y.sub(&task.target)?;
        let loss = diff.dot(&diff)? / diff.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss diverged after {} steps", losses.len())));
        }
        losses.push(loss);
        let grad_out = diff.mul_scalar(2.0 / diff.len() as f64);
        let grads = module.backward(&task.input, &grad_out)?;
        let g: Vec<Tensor> = grads.params().into_iter().cloned().collect();
        let refs: Vec<&Tensor> = g.iter().collect();
        sgd_step(module.parameters_mut(), &refs, lr)?;
    }
    losses.push(mse(&module.forward(&task.input)?, &task.target)?);
    Ok(FitReport { losses, bilinear_mse, lr })
}
