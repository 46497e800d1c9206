//! Channel/space layout transforms.
//!
//! Pixel shuffle ordering: input channel `k·s² + dy·s + dx` lands at output
//! channel `k`, spatial offset `(dy, dx)` inside each `s × s` block.

use super::{Element, Shape, Tensor};
use crate::error::{Error, Result};

impl<T: Element> Tensor<T> {
    /// Depth-to-space: `(n, c, h, w)` to `(n, c/s², s·h, s·w)`.
    pub fn pixel_shuffle(&self, s: usize) -> Result<Self> {
        let Shape { n, c, h, w } = self.shape();
        if s == 0 || c % (s * s) != 0 {
            return Err(Error::shape(format!(
                "pixel_shuffle: {c} channels not divisible by scale² = {}",
                s * s
            )));
        }
        let oc = c / (s * s);
        let (oh, ow) = (h * s, w * s);
        let mut out = Tensor::zeros(Shape::new(n, oc, oh, ow)?);
        let src = self.data();
        let dst = out.data_mut();
        for b in 0..n {
            for k in 0..oc {
                for dy in 0..s {
                    for dx in 0..s {
                        let ic = k * s * s + dy * s + dx;
                        let in_base = (b * c + ic) * h * w;
                        let out_base = (b * oc + k) * oh * ow;
                        for y in 0..h {
                            let row = out_base + (y * s + dy) * ow + dx;
                            let in_row = in_base + y * w;
                            for x in 0..w {
                                dst[row + x * s] = src[in_row + x];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Space-to-depth: exact inverse of [`Tensor::pixel_shuffle`].
    pub fn pixel_unshuffle(&self, s: usize) -> Result<Self> {
        let Shape { n, c, h, w } = self.shape();
        if s == 0 || h % s != 0 || w % s != 0 {
            return Err(Error::shape(format!(
                "pixel_unshuffle: spatial size {h}x{w} not divisible by scale {s}"
            )));
        }
        let oc = c * s * s;
        let (oh, ow) = (h / s, w / s);
        let mut out = Tensor::zeros(Shape::new(n, oc, oh, ow)?);
        let src = self.data();
        let dst = out.data_mut();
        for b in 0..n {
            for k in 0..c {
                for dy in 0..s {
                    for dx in 0..s {
                        let occ = k * s * s + dy * s + dx;
                        let in_base = (b * c + k) * h * w;
                        let out_base = (b * oc + occ) * oh * ow;
                        for y in 0..oh {
                            let in_row = in_base + (y * s + dy) * w + dx;
                            let out_row = out_base + y * ow;
                            for x in 0..ow {
                                dst[out_row + x] = src[in_row + x * s];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Splits into `groups` tensors of `c / groups` consecutive channels.
    pub fn split_channels(&self, groups: usize) -> Result<Vec<Self>> {
        let shape = self.shape();
        if groups == 0 || shape.c % groups != 0 {
            return Err(Error::shape(format!(
                "split_channels: {} channels not divisible into {groups} groups",
                shape.c
            )));
        }
        let cg = shape.c / groups;
        let part_shape = shape.with_channels(cg)?;
        let plane = shape.plane();
        let mut parts: Vec<Vec<T>> = vec![Vec::with_capacity(part_shape.numel()); groups];
        for b in 0..shape.n {
            for (g, part) in parts.iter_mut().enumerate() {
                let start = (b * shape.c + g * cg) * plane;
                part.extend_from_slice(&self.data()[start..start + cg * plane]);
            }
        }
        parts
            .into_iter()
            .map(|d| Tensor::from_data(part_shape, d))
            .collect()
    }

    /// Concatenates along channels. All parts must agree on `n`, `h`, `w`.
    pub fn concat_channels(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_channels: no tensors"))?
            .shape();
        let mut c = 0;
        for p in parts {
            let s = p.shape();
            if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
                return Err(Error::shape(format!(
                    "concat_channels: {} incompatible with {}",
                    s, first
                )));
            }
            c += s.c;
        }
        let shape = first.with_channels(c)?;
        let mut data = Vec::with_capacity(shape.numel());
        let plane = shape.plane();
        for b in 0..shape.n {
            for p in parts {
                let pc = p.shape().c;
                let start = b * pc * plane;
                data.extend_from_slice(&p.data()[start..start + pc * plane]);
            }
        }
        Tensor::from_data(shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn shuffle_scale_one_is_identity() {
        let x = Tensor::<f64>::randn(Shape::new(2, 3, 4, 5).unwrap(), &mut Rng::new(0), 1.0).unwrap();
        assert_eq!(x.pixel_shuffle(1).unwrap(), x);
        assert_eq!(x.pixel_unshuffle(1).unwrap(), x);
    }

    #[test]
    fn shuffle_four_channels() {
        // [a, b, c, d] -> [[a, b], [c, d]]
        let x = Tensor::<f64>::from_data(Shape::new(1, 4, 1, 1).unwrap(), vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        let y = x.pixel_shuffle(2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2).unwrap());
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(y.pixel_unshuffle(2).unwrap(), x);
    }

    #[test]
    fn shuffle_two_blocks() {
        // 2x1 low-res pixels, 4 channels each; channel dy*2+dx fills block offset (dy, dx).
        let vals: Vec<f64> = (0..8).map(f64::from).collect();
        let x = Tensor::from_data(Shape::new(1, 4, 1, 2).unwrap(), vals).unwrap();
        let y = x.pixel_shuffle(2).unwrap();
        // channel k holds [k0, k1] for the two pixels: ch0=[0,1] ch1=[2,3] ch2=[4,5] ch3=[6,7]
        assert_eq!(y.data(), &[0.0, 2.0, 1.0, 3.0, 4.0, 6.0, 5.0, 7.0]);
    }

    #[test]
    fn unshuffle_shape() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 1, 4, 4).unwrap());
        assert_eq!(x.pixel_unshuffle(2).unwrap().shape(), Shape::new(1, 4, 2, 2).unwrap());
    }

    #[test]
    fn divisibility_errors() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 3, 3, 4).unwrap());
        assert!(x.pixel_shuffle(2).is_err());
        assert!(x.pixel_unshuffle(2).is_err());
        assert!(x.split_channels(2).is_err());
    }

    #[test]
    fn split_concat_round_trip() {
        let x = Tensor::<f64>::randn(Shape::new(2, 8, 3, 3).unwrap(), &mut Rng::new(5), 1.0).unwrap();
        let parts = x.split_channels(4).unwrap();
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[1].at(1, 0, 2, 2), x.at(1, 2, 2, 2));
        assert_eq!(Tensor::concat_channels(&parts).unwrap(), x);
    }
}
