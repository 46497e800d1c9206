use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Element, Rng, Shape, Tensor};

/// Indices `t` in `0..n_iter` for which `t·stride + offset` lands in `0..n_dst`.
fn valid_range(n_iter: usize, stride: usize, offset: isize, n_dst: usize) -> Range<usize> {
    let st = stride as isize;
    // smallest t with t*st + offset >= 0
    let lo = if offset >= 0 { 0 } else { ((-offset) + st - 1) / st };
    // largest t with t*st + offset <= n_dst - 1
    let top = n_dst as isize - 1 - offset;
    if top < 0 {
        return 0..0;
    }
    let hi = (top / st + 1).min(n_iter as isize);
    if lo >= hi {
        0..0
    } else {
        lo as usize..hi as usize
    }
}

/// `dst[t] += w · src[t·stride + offset]` over `range`.
#[inline]
fn axpy_gather<T: Element>(dst: &mut [T], src: &[T], w: T, range: Range<usize>, stride: usize, offset: isize) {
    if range.is_empty() {
        return;
    }
    let first = (range.start as isize * stride as isize + offset) as usize;
    if stride == 1 {
        let len = range.len();
        for (d, &s) in dst[range].iter_mut().zip(&src[first..first + len]) {
            *d += w * s;
        }
    } else {
        for (k, d) in dst[range].iter_mut().enumerate() {
            *d += w * src[first + k * stride];
        }
    }
}

/// `dst[t·stride + offset] += w · src[t]` over `range`.
#[inline]
fn axpy_scatter<T: Element>(dst: &mut [T], src: &[T], w: T, range: Range<usize>, stride: usize, offset: isize) {
    if range.is_empty() {
        return;
    }
    let first = (range.start as isize * stride as isize + offset) as usize;
    if stride == 1 {
        let len = range.len();
        for (d, &s) in dst[first..first + len].iter_mut().zip(&src[range]) {
            *d += w * s;
        }
    } else {
        for (k, &s) in src[range].iter().enumerate() {
            dst[first + k * stride] += w * s;
        }
    }
}

#[inline]
fn dot_strided<T: Element>(a: &[T], b: &[T], range: Range<usize>, stride: usize, offset: isize) -> T {
    if range.is_empty() {
        return T::zero();
    }
    let first = (range.start as isize * stride as isize + offset) as usize;
    let mut acc = T::zero();
    for (k, &av) in a[range].iter().enumerate() {
        acc += av * b[first + k * stride];
    }
    acc
}

/// Square-kernel cross-correlation with zero padding.
///
/// `weight`: `(c_out, c_in, k, k)`; `bias`: `(1, c_out, 1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dLayer<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T = f64> {
    pub x: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Element> ConvGrads<T> {
    pub fn params(&self) -> Vec<&Tensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }
}

fn bias_grad<T: Element>(grad_out: &Tensor<T>, bias: Option<&Tensor<T>>) -> Option<Tensor<T>> {
    bias.map(|b| {
        let s = grad_out.shape();
        let mut gb = Tensor::zeros(b.shape());
        for (o, slot) in gb.data_mut().iter_mut().enumerate() {
            *slot = (0..s.n).map(|n| grad_out.plane(n, o).iter().copied().sum::<T>()).sum();
        }
        gb
    })
}

fn check_bias<T: Element>(bias: &Option<Tensor<T>>, c_out: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != Shape::new(1, c_out, 1, 1)? {
            return Err(Error::shape(format!("bias must be (1, {c_out}, 1, 1), got {}", b.shape())));
        }
    }
    Ok(())
}

impl<T: Element> Conv2dLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Option<Tensor<T>>, stride: usize, padding: usize) -> Result<Self> {
        let ws = weight.shape();
        if ws.h != ws.w {
            return Err(Error::shape(format!("conv kernel must be square, got {ws}")));
        }
        if stride == 0 {
            return Err(Error::invalid("conv stride must be >= 1"));
        }
        check_bias(&bias, ws.n)?;
        Ok(Conv2dLayer { weight, bias, stride, padding })
    }

    /// Fan-in scaled normal init (std `1/sqrt(c_in·k²)`), zero bias.
    pub fn fan_in(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let weight = Tensor::randn(Shape::new(c_out, c_in, k, k)?, rng, 1.0 / ((c_in * k * k) as f64).sqrt())?;
        let bias = if bias { Some(Tensor::zeros(Shape::new(1, c_out, 1, 1)?)) } else { None };
        Self::new(weight, bias, stride, padding)
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape().c
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape().n
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
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

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.c_in() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {}",
                self.c_in(),
                input.c
            )));
        }
        let k = self.kernel();
        let (ph, pw) = (input.h + 2 * self.padding, input.w + 2 * self.padding);
        if ph < k || pw < k {
            return Err(Error::shape(format!(
                "conv kernel {k} larger than padded input {ph}x{pw}"
            )));
        }
        Shape::new(input.n, self.c_out(), (ph - k) / self.stride + 1, (pw - k) / self.stride + 1)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = x.shape();
        let os = self.output_shape(xs)?;
        let (k, st, pad) = (self.kernel(), self.stride, self.padding as isize);
        let (c_in, c_out) = (self.c_in(), self.c_out());
        let w = self.weight.data();
        let bias = self.bias.as_ref().map(|b| b.data());
        let mut out = Tensor::zeros(os);
        out.data_mut()
            .par_chunks_mut(os.plane())
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, o) = (idx / c_out, idx % c_out);
                if let Some(bias) = bias {
                    dst.fill(bias[o]);
                }
                for i in 0..c_in {
                    let src = x.plane(b, i);
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(os.h, st, yoff, xs.h);
                        for kx in 0..k {
                            let wv = w[((o * c_in + i) * k + ky) * k + kx];
                            let xoff = kx as isize - pad;
                            let cols = valid_range(os.w, st, xoff, xs.w);
                            for oy in rows.clone() {
                                let iy = (oy as isize * st as isize + yoff) as usize;
                                axpy_gather(
                                    &mut dst[oy * os.w..(oy + 1) * os.w],
                                    &src[iy * xs.w..(iy + 1) * xs.w],
                                    wv,
                                    cols.clone(),
                                    st,
                                    xoff,
                                );
                            }
                        }
                    }
                }
            });
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        let xs = x.shape();
        let os = self.output_shape(xs)?;
        if grad_out.shape() != os {
            return Err(Error::shape(format!(
                "conv backward: grad_out {} does not match output {os}",
                grad_out.shape()
            )));
        }
        let (k, st, pad) = (self.kernel(), self.stride, self.padding as isize);
        let (c_in, c_out) = (self.c_in(), self.c_out());
        let w = self.weight.data();

        let mut grad_x = Tensor::zeros(xs);
        grad_x
            .data_mut()
            .par_chunks_mut(xs.plane())
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, i) = (idx / c_in, idx % c_in);
                for o in 0..c_out {
                    let g = grad_out.plane(b, o);
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(os.h, st, yoff, xs.h);
                        for kx in 0..k {
                            let wv = w[((o * c_in + i) * k + ky) * k + kx];
                            let xoff = kx as isize - pad;
                            let cols = valid_range(os.w, st, xoff, xs.w);
                            for oy in rows.clone() {
                                let iy = (oy as isize * st as isize + yoff) as usize;
                                axpy_scatter(
                                    &mut dst[iy * xs.w..(iy + 1) * xs.w],
                                    &g[oy * os.w..(oy + 1) * os.w],
                                    wv,
                                    cols.clone(),
                                    st,
                                    xoff,
                                );
                            }
                        }
                    }
                }
            });

        let mut grad_w = Tensor::zeros(self.weight.shape());
        grad_w
            .data_mut()
            .par_chunks_mut(c_in * k * k)
            .enumerate()
            .for_each(|(o, block)| {
                for i in 0..c_in {
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(os.h, st, yoff, xs.h);
                        for kx in 0..k {
                            let xoff = kx as isize - pad;
                            let cols = valid_range(os.w, st, xoff, xs.w);
                            let mut acc = T::zero();
                            for b in 0..xs.n {
                                let g = grad_out.plane(b, o);
                                let src = x.plane(b, i);
                                for oy in rows.clone() {
                                    let iy = (oy as isize * st as isize + yoff) as usize;
                                    acc += dot_strided(
                                        &g[oy * os.w..(oy + 1) * os.w],
                                        &src[iy * xs.w..(iy + 1) * xs.w],
                                        cols.clone(),
                                        st,
                                        xoff,
                                    );
                                }
                            }
                            block[(i * k + ky) * k + kx] = acc;
                        }
                    }
                }
            });

        Ok(ConvGrads {
            x: grad_x,
            weight: grad_w,
            bias: bias_grad(grad_out, self.bias.as_ref()),
        })
    }
}

/// Transposed convolution: the input-gradient map of a strided convolution.
///
/// `weight`: `(c_in, c_out, k, k)`. Output extent is
/// `(h − 1)·stride − 2·padding + k + output_padding`.
#[derive(Clone, Debug, PartialEq)]
pub struct Deconv2dLayer<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl<T: Element> Deconv2dLayer<T> {
    pub fn new(
        weight: Tensor<T>,
        bias: Option<Tensor<T>>,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        let ws = weight.shape();
        if ws.h != ws.w {
            return Err(Error::shape(format!("deconv kernel must be square, got {ws}")));
        }
        if stride == 0 {
            return Err(Error::invalid("deconv stride must be >= 1"));
        }
        if output_padding >= stride {
            return Err(Error::invalid(format!(
                "output_padding {output_padding} must be smaller than stride {stride}"
            )));
        }
        check_bias(&bias, ws.c)?;
        Ok(Deconv2dLayer { weight, bias, stride, padding, output_padding })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn fan_in(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let weight = Tensor::randn(Shape::new(c_in, c_out, k, k)?, rng, 1.0 / ((c_in * k * k) as f64).sqrt())?;
        let bias = if bias { Some(Tensor::zeros(Shape::new(1, c_out, 1, 1)?)) } else { None };
        Self::new(weight, bias, stride, padding, output_padding)
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape().n
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
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

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.c_in() {
            return Err(Error::shape(format!(
                "deconv expects {} input channels, got {}",
                self.c_in(),
                input.c
            )));
        }
        let extent = |len: usize| -> Result<usize> {
            let full = (len - 1) * self.stride + self.kernel() + self.output_padding;
            full.checked_sub(2 * self.padding)
                .filter(|&e| e > 0)
                .ok_or_else(|| Error::shape("deconv padding exceeds output extent"))
        };
        Shape::new(input.n, self.c_out(), extent(input.h)?, extent(input.w)?)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = x.shape();
        let os = self.output_shape(xs)?;
        let (k, st, pad) = (self.kernel(), self.stride, self.padding as isize);
        let (c_in, c_out) = (self.c_in(), self.c_out());
        let w = self.weight.data();
        let bias = self.bias.as_ref().map(|b| b.data());
        let mut out = Tensor::zeros(os);
        out.data_mut()
            .par_chunks_mut(os.plane())
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, o) = (idx / c_out, idx % c_out);
                if let Some(bias) = bias {
                    dst.fill(bias[o]);
                }
                for i in 0..c_in {
                    let src = x.plane(b, i);
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(xs.h, st, yoff, os.h);
                        for kx in 0..k {
                            let wv = w[((i * c_out + o) * k + ky) * k + kx];
                            let xoff = kx as isize - pad;
                            let cols = valid_range(xs.w, st, xoff, os.w);
                            for iy in rows.clone() {
                                let oy = (iy as isize * st as isize + yoff) as usize;
                                axpy_scatter(
                                    &mut dst[oy * os.w..(oy + 1) * os.w],
                                    &src[iy * xs.w..(iy + 1) * xs.w],
                                    wv,
                                    cols.clone(),
                                    st,
                                    xoff,
                                );
                            }
                        }
                    }
                }
            });
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        let xs = x.shape();
        let os = self.output_shape(xs)?;
        if grad_out.shape() != os {
            return Err(Error::shape(format!(
                "deconv backward: grad_out {} does not match output {os}",
                grad_out.shape()
            )));
        }
        let (k, st, pad) = (self.kernel(), self.stride, self.padding as isize);
        let (c_in, c_out) = (self.c_in(), self.c_out());
        let w = self.weight.data();

        let mut grad_x = Tensor::zeros(xs);
        grad_x
            .data_mut()
            .par_chunks_mut(xs.plane())
            .enumerate()
            .for_each(|(idx, dst)| {
                let (b, i) = (idx / c_in, idx % c_in);
                for o in 0..c_out {
                    let g = grad_out.plane(b, o);
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(xs.h, st, yoff, os.h);
                        for kx in 0..k {
                            let wv = w[((i * c_out + o) * k + ky) * k + kx];
                            let xoff = kx as isize - pad;
                            let cols = valid_range(xs.w, st, xoff, os.w);
                            for iy in rows.clone() {
                                let oy = (iy as isize * st as isize + yoff) as usize;
                                axpy_gather(
                                    &mut dst[iy * xs.w..(iy + 1) * xs.w],
                                    &g[oy * os.w..(oy + 1) * os.w],
                                    wv,
                                    cols.clone(),
                                    st,
                                    xoff,
                                );
                            }
                        }
                    }
                }
            });

        let mut grad_w = Tensor::zeros(self.weight.shape());
        grad_w
            .data_mut()
            .par_chunks_mut(c_out * k * k)
            .enumerate()
            .for_each(|(i, block)| {
                for o in 0..c_out {
                    for ky in 0..k {
                        let yoff = ky as isize - pad;
                        let rows = valid_range(xs.h, st, yoff, os.h);
                        for kx in 0..k {
                            let xoff = kx as isize - pad;
                            let cols = valid_range(xs.w, st, xoff, os.w);
                            let mut acc = T::zero();
                            for b in 0..xs.n {
                                let src = x.plane(b, i);
                                let g = grad_out.plane(b, o);
                                for iy in rows.clone() {
                                    let oy = (iy as isize * st as isize + yoff) as usize;
                                    acc += dot_strided(
                                        &src[iy * xs.w..(iy + 1) * xs.w],
                                        &g[oy * os.w..(oy + 1) * os.w],
                                        cols.clone(),
                                        st,
                                        xoff,
                                    );
                                }
                            }
                            block[(o * k + ky) * k + kx] = acc;
                        }
                    }
                }
            });

        Ok(ConvGrads {
            x: grad_x,
            weight: grad_w,
            bias: bias_grad(grad_out, self.bias.as_ref()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::LinearLayer;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn valid_range_bounds() {
        assert_eq!(valid_range(5, 1, -1, 5), 1..5);
        assert_eq!(valid_range(5, 1, 1, 5), 0..4);
        assert_eq!(valid_range(3, 2, -1, 6), 1..3);
        assert_eq!(valid_range(3, 2, 0, 6), 0..3);
        assert_eq!(valid_range(3, 2, 1, 6), 0..3);
        assert_eq!(valid_range(3, 2, 2, 6), 0..2);
        assert_eq!(valid_range(2, 1, 5, 3), 0..0);
    }

    #[test]
    fn one_by_one_conv_matches_linear() {
        let mut rng = Rng::new(11);
        let lin = LinearLayer::<f64>::fan_in(5, 3, true, &mut rng).unwrap();
        let mut lin = lin;
        lin.bias = Some(Tensor::randn(shape(1, 3, 1, 1), &mut rng, 1.0).unwrap());
        let conv = Conv2dLayer::new(lin.weight.clone(), lin.bias.clone(), 1, 0).unwrap();
        let x = Tensor::randn(shape(2, 5, 4, 3), &mut rng, 1.0).unwrap();
        assert_eq!(conv.forward(&x).unwrap(), lin.forward(&x).unwrap());
    }

    #[test]
    fn conv_box_filter_hand_computed() {
        // 3x3 ones kernel, padding 1, over [[1,2],[3,4]]: every output sees all four values.
        let conv = Conv2dLayer::new(Tensor::full(shape(1, 1, 3, 3), 1.0), None, 1, 1).unwrap();
        let x = Tensor::from_data(shape(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), &[10.0, 10.0, 10.0, 10.0]);
        let conv = Conv2dLayer::new(Tensor::full(shape(1, 1, 2, 2), 1.0), None, 2, 0).unwrap();
        let x = Tensor::from_data(shape(1, 1, 2, 4), (1..=8).map(f64::from).collect()).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), &[1.0 + 2.0 + 5.0 + 6.0, 3.0 + 4.0 + 7.0 + 8.0]);
    }

    #[test]
    fn deconv_doubles_resolution() {
        let layer = Deconv2dLayer::<f64>::fan_in(8, 8, 3, 2, 1, 1, true, &mut Rng::new(1)).unwrap();
        let x = Tensor::zeros(shape(1, 8, 5, 5));
        assert_eq!(layer.forward(&x).unwrap().shape(), shape(1, 8, 10, 10));
    }

    #[test]
    fn deconv_impulse_hand_computed() {
        // Kernel taps (ky, kx) in {1,2}^2 set to 1. With stride 2 and padding 1, input
        // pixel (iy, ix) writes output rows 2iy + ky - 1 in {2iy, 2iy+1}: a 2x2 hold block.
        let mut weight = Tensor::zeros(shape(1, 1, 3, 3));
        for ky in 1..3 {
            for kx in 1..3 {
                weight.set(0, 0, ky, kx, 1.0);
            }
        }
        let layer = Deconv2dLayer::new(weight, None, 2, 1, 1).unwrap();
        let mut x = Tensor::zeros(shape(1, 1, 3, 3));
        x.set(0, 0, 1, 1, 1.0);
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), shape(1, 1, 6, 6));
        #[rustfmt::skip]
        let expected = [
            0., 0., 0., 0., 0., 0.,
            0., 0., 0., 0., 0., 0.,
            0., 0., 1., 1., 0., 0.,
            0., 0., 1., 1., 0., 0.,
            0., 0., 0., 0., 0., 0.,
            0., 0., 0., 0., 0., 0.,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn deconv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, deconv(y)> for shared weights and no bias.
        let mut rng = Rng::new(21);
        let w = Tensor::<f64>::randn(shape(4, 3, 3, 3), &mut rng, 1.0).unwrap();
        let conv = Conv2dLayer::new(w.clone(), None, 2, 1).unwrap();
        let x = Tensor::randn(shape(1, 3, 8, 8), &mut rng, 1.0).unwrap();
        let cx = conv.forward(&x).unwrap();
        let y = Tensor::randn(cx.shape(), &mut rng, 1.0).unwrap();
        let deconv = Deconv2dLayer::new(w, None, 2, 1, 1).unwrap();
        let dy = deconv.forward(&y).unwrap();
        assert_eq!(dy.shape(), x.shape());
        let lhs = cx.dot(&y).unwrap();
        let rhs = x.dot(&dy).unwrap();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn invalid_geometry() {
        let conv = Conv2dLayer::<f64>::fan_in(2, 2, 5, 1, 0, false, &mut Rng::new(0)).unwrap();
        assert!(conv.forward(&Tensor::zeros(shape(1, 2, 3, 3))).is_err());
        assert!(conv.forward(&Tensor::zeros(shape(1, 3, 8, 8))).is_err());
        let w = Tensor::<f64>::zeros(shape(1, 1, 3, 3));
        assert!(Deconv2dLayer::new(w, None, 2, 1, 2).is_err());
    }
}
