use crate::error::{Error, Result};
use crate::layers::{Conv2dLayer, Deconv2dLayer};
use crate::tensor::{Element, Rng, Tensor};

/// ×2 transposed convolution: kernel 3, stride 2, padding 1, output padding 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconvUpsampler<T = f64> {
    pub layer: Deconv2dLayer<T>,
}

impl<T: Element> DeconvUpsampler<T> {
    pub const KERNEL: usize = 3;

    pub fn new(channels: usize, scale: usize, rng: &mut Rng) -> Result<Self> {
        if scale != 2 {
            return Err(Error::invalid(format!("deconv upsampler supports scale 2 only, got {scale}")));
        }
        Ok(DeconvUpsampler {
            layer: Deconv2dLayer::fan_in(channels, channels, Self::KERNEL, 2, 1, 1, true, rng)?,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.layer.forward(x)
    }
}

/// 3×3 convolution to `s²·c` channels followed by a pixel shuffle.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelShuffleUpsampler<T = f64> {
    pub conv: Conv2dLayer<T>,
    pub scale: usize,
}

impl<T: Element> PixelShuffleUpsampler<T> {
    pub const KERNEL: usize = 3;

    pub fn new(channels: usize, scale: usize, rng: &mut Rng) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale must be >= 1"));
        }
        Ok(PixelShuffleUpsampler {
            conv: Conv2dLayer::fan_in(channels, channels * scale * scale, Self::KERNEL, 1, 1, true, rng)?,
            scale,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.conv.forward(x)?.pixel_shuffle(self.scale)
    }
}
