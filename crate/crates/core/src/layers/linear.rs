use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Element, Rng, Shape, Tensor};

/// Pointwise projection (a 1×1 convolution) applied independently per pixel.
///
/// `weight` has shape `(c_out, c_in, 1, 1)`; `bias`, when present, `(1, c_out, 1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct LinearGrads<T = f64> {
    pub x: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Element> LinearGrads<T> {
    pub fn params(&self) -> Vec<&Tensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }
}

impl<T: Element> LinearLayer<T> {
    pub fn zeros(c_in: usize, c_out: usize, bias: bool) -> Result<Self> {
        Ok(LinearLayer {
            weight: Tensor::zeros(Shape::new(c_out, c_in, 1, 1)?),
            bias: if bias {
                Some(Tensor::zeros(Shape::new(1, c_out, 1, 1)?))
            } else {
                None
            },
        })
    }

    /// Normal weights with std `1/sqrt(c_in)`; bias starts at zero.
    pub fn fan_in(c_in: usize, c_out: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        let mut layer = Self::zeros(c_in, c_out, bias)?;
        layer.weight = Tensor::randn(layer.weight.shape(), rng, 1.0 / (c_in as f64).sqrt())?;
        Ok(layer)
    }

    pub fn from_weights(weight: Tensor<T>, bias: Option<Tensor<T>>) -> Result<Self> {
        let ws = weight.shape();
        if ws.h != 1 || ws.w != 1 {
            return Err(Error::shape(format!("linear weight must be (c_out, c_in, 1, 1), got {ws}")));
        }
        if let Some(b) = &bias {
            if b.shape() != Shape::new(1, ws.n, 1, 1)? {
                return Err(Error::shape(format!("linear bias must be (1, {}, 1, 1), got {}", ws.n, b.shape())));
            }
        }
        Ok(LinearLayer { weight, bias })
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape().c
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape().n
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != self.c_in() {
            return Err(Error::shape(format!(
                "linear expects {} input channels, got {}",
                self.c_in(),
                x.shape().c
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let xs = x.shape();
        let (c_in, c_out, plane) = (self.c_in(), self.c_out(), xs.plane());
        let mut out = Tensor::zeros(xs.with_channels(c_out)?);
        let w = self.weight.data();
        let bias = self.bias.as_ref().map(|b| b.data());
        out.data_mut()
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, o) = (idx / c_out, idx % c_out);
                if let Some(bias) = bias {
                    dst.fill(bias[o]);
                }
                for i in 0..c_in {
                    let wi = w[o * c_in + i];
                    let src = x.plane(b, i);
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += wi * s;
                    }
                }
            });
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LinearGrads<T>> {
        self.check_input(x)?;
        let xs = x.shape();
        let (c_in, c_out, plane) = (self.c_in(), self.c_out(), xs.plane());
        if grad_out.shape() != xs.with_channels(c_out)? {
            return Err(Error::shape(format!(
                "linear backward: grad_out {} does not match output {}",
                grad_out.shape(),
                xs.with_channels(c_out)?
            )));
        }
        let w = self.weight.data();

        let mut grad_x = Tensor::zeros(xs);
        grad_x
            .data_mut()
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, i) = (idx / c_in, idx % c_in);
                for o in 0..c_out {
                    let wi = w[o * c_in + i];
                    for (d, &g) in dst.iter_mut().zip(grad_out.plane(b, o)) {
                        *d += wi * g;
                    }
                }
            });

        let mut grad_w = Tensor::zeros(self.weight.shape());
        grad_w
            .data_mut()
            .par_chunks_mut(c_in)
            .enumerate()
            .for_each(|(o, row)| {
                for (i, slot) in row.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for b in 0..xs.n {
                        for (&g, &v) in grad_out.plane(b, o).iter().zip(x.plane(b, i)) {
                            acc += g * v;
                        }
                    }
                    *slot = acc;
                }
            });

        let grad_b = self.bias.as_ref().map(|b| {
            let mut gb = Tensor::zeros(b.shape());
            for (o, slot) in gb.data_mut().iter_mut().enumerate() {
                *slot = (0..xs.n).map(|n| grad_out.plane(n, o).iter().copied().sum::<T>()).sum();
            }
            gb
        });

        Ok(LinearGrads {
            x: grad_x,
            weight: grad_w,
            bias: grad_b,
        })
    }
}
