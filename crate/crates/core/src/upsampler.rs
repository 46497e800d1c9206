//! A closed set of upsampling operators behind one type, used by the
//! benchmark harness, the complexity model and the command line.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{bilinear_upsample, nearest_upsample, Carafe, CarafeConfig, DeconvUpsampler, PixelShuffleUpsampler};
use crate::dysample::{make_variant, DySampleModule, Variant};
use crate::error::{Error, Result};
use crate::tensor::{Element, Rng, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Nearest,
    Bilinear,
    Deconv,
    PixelShuffle,
    Carafe,
    DySample(Variant),
}

impl OpKind {
    pub const ALL: [OpKind; 9] = [
        OpKind::Nearest,
        OpKind::Bilinear,
        OpKind::Deconv,
        OpKind::PixelShuffle,
        OpKind::Carafe,
        OpKind::DySample(Variant::DySample),
        OpKind::DySample(Variant::DySamplePlus),
        OpKind::DySample(Variant::DySampleS),
        OpKind::DySample(Variant::DySampleSPlus),
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Nearest => "nearest",
            OpKind::Bilinear => "bilinear",
            OpKind::Deconv => "deconv",
            OpKind::PixelShuffle => "pixelshuffle",
            OpKind::Carafe => "carafe",
            OpKind::DySample(v) => v.name(),
        }
    }

    pub fn valid_names() -> String {
        OpKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown op '{s}', expected one of: {}", OpKind::valid_names())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Upsampler<T = f64> {
    Nearest { scale: usize },
    Bilinear { scale: usize },
    Deconv(DeconvUpsampler<T>),
    PixelShuffle(PixelShuffleUpsampler<T>),
    Carafe(Carafe<T>),
    DySample(DySampleModule<T>),
}

impl<T: Element> Upsampler<T> {
    /// Builds an operator for `channels`-channel inputs. Learned baselines draw
    /// fan-in scaled weights from `rng`; DySample heads start at zero.
    pub fn build(kind: OpKind, channels: usize, scale: usize, rng: &mut Rng) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale must be >= 1"));
        }
        Ok(match kind {
            OpKind::Nearest => Upsampler::Nearest { scale },
            OpKind::Bilinear => Upsampler::Bilinear { scale },
            OpKind::Deconv => Upsampler::Deconv(DeconvUpsampler::new(channels, scale, rng)?),
            OpKind::PixelShuffle => Upsampler::PixelShuffle(PixelShuffleUpsampler::new(channels, scale, rng)?),
            OpKind::Carafe => {
                let cfg = CarafeConfig { scale, ..CarafeConfig::default() };
                Upsampler::Carafe(Carafe::new(channels, cfg, rng)?)
            }
            OpKind::DySample(v) => Upsampler::DySample(make_variant(v, channels, scale)?),
        })
    }

    pub fn kind(&self) -> OpKind {
        match self {
            Upsampler::Nearest { .. } => OpKind::Nearest,
            Upsampler::Bilinear { .. } => OpKind::Bilinear,
            Upsampler::Deconv(_) => OpKind::Deconv,
            Upsampler::PixelShuffle(_) => OpKind::PixelShuffle,
            Upsampler::Carafe(_) => OpKind::Carafe,
            Upsampler::DySample(m) => {
                let cfg = m.config();
                let v = Variant::ALL
                    .into_iter()
                    .find(|v| v.style() == cfg.style && v.scope().is_dynamic() == cfg.scope.is_dynamic())
                    .unwrap_or(Variant::DySample);
                OpKind::DySample(v)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn scale(&self) -> usize {
        match self {
            Upsampler::Nearest { scale } | Upsampler::Bilinear { scale } => *scale,
            Upsampler::Deconv(_) => 2,
            Upsampler::PixelShuffle(p) => p.scale,
            Upsampler::Carafe(c) => c.config().scale,
            Upsampler::DySample(m) => m.scale(),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Upsampler::Nearest { scale } => nearest_upsample(x, *scale),
            Upsampler::Bilinear { scale } => bilinear_upsample(x, *scale),
            Upsampler::Deconv(d) => d.forward(x),
            Upsampler::PixelShuffle(p) => p.forward(x),
            Upsampler::Carafe(c) => c.forward(x),
            Upsampler::DySample(m) => m.forward(x),
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let s = self.scale();
        Shape::new(input.n, input.c, input.h * s, input.w * s)
    }

    /// Every learnable tensor, with a stable name.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        fn named<'a, T>(prefix: &str, weight: &'a Tensor<T>, bias: &'a Option<Tensor<T>>) -> Vec<(String, &'a Tensor<T>)> {
            let mut out = vec![(format!("{prefix}.weight"), weight)];
            if let Some(b) = bias {
                out.push((format!("{prefix}.bias"), b));
            }
            out
        }
        match self {
            Upsampler::Nearest { .. } | Upsampler::Bilinear { .. } => Vec::new(),
            Upsampler::Deconv(d) => named("deconv", &d.layer.weight, &d.layer.bias),
            Upsampler::PixelShuffle(p) => named("conv", &p.conv.weight, &p.conv.bias),
            Upsampler::Carafe(c) => {
                let mut out = named("compress", &c.compress.weight, &c.compress.bias);
                out.extend(named("encoder", &c.encoder.weight, &c.encoder.bias));
                out
            }
            Upsampler::DySample(m) => m.named_parameters(),
        }
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    /// Replaces the named parameter. The new tensor must keep its shape.
    pub fn set_parameter(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let names: Vec<String> = self.named_parameters().into_iter().map(|(n, _)| n).collect();
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("{} has no parameter '{name}' (has: {})", self.name(), names.join(", "))))?;
        let slot = self
            .parameters_mut()
            .into_iter()
            .nth(idx)
            .expect("named_parameters and parameters_mut agree");
        if slot.shape() != value.shape() {
            return Err(Error::shape(format!(
                "parameter '{name}' has shape {}, got {}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Upsampler::Nearest { .. } | Upsampler::Bilinear { .. } => Vec::new(),
            Upsampler::Deconv(d) => d.layer.parameters_mut(),
            Upsampler::PixelShuffle(p) => p.conv.parameters_mut(),
            Upsampler::Carafe(c) => c.parameters_mut(),
            Upsampler::DySample(m) => m.parameters_mut(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for k in OpKind::ALL {
            assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
        }
        let err = "bicubic".parse::<OpKind>().unwrap_err().to_string();
        assert!(err.contains("dysample-s+"));
    }

    #[test]
    fn build_and_run_all() {
        let mut rng = Rng::new(0);
        let x = Tensor::<f64>::randn(Shape::new(1, 32, 4, 4).unwrap(), &mut rng, 1.0).unwrap();
        for k in OpKind::ALL {
            let op = Upsampler::build(k, 32, 2, &mut rng).unwrap();
            assert_eq!(op.kind(), k);
            assert_eq!(op.forward(&x).unwrap().shape(), Shape::new(1, 32, 8, 8).unwrap());
        }
    }

    #[test]
    fn set_parameter_checks_name_and_shape() {
        let mut op = Upsampler::<f64>::build(OpKind::DySample(Variant::DySample), 8, 2, &mut Rng::new(0)).unwrap();
        let w = op.parameters()[0].shape();
        op.set_parameter("offset_head.weight", Tensor::full(w, 0.5)).unwrap();
        assert!(op.parameters()[0].data().iter().all(|&v| v == 0.5));
        assert!(op.set_parameter("nope", Tensor::full(w, 0.5)).is_err());
        assert!(op
            .set_parameter("offset_head.weight", Tensor::zeros(Shape::new(1, 1, 1, 1).unwrap()))
            .is_err());
    }
}
