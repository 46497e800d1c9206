//! Dense NCHW tensors.
//!
//! A [`Tensor`] is always four-dimensional `(n, c, h, w)`, row-major with `w`
//! varying fastest. All operations are pure: they borrow their inputs and
//! return freshly allocated outputs.

mod element;
mod layout;
mod rng;

use std::fmt;

pub use element::{DType, Element};
pub use rng::Rng;

use crate::error::{Error, Result};

/// Extent of a 4-D tensor. Every component is at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!(
                "shape components must be >= 1, got ({n}, {c}, {h}, {w})"
            )));
        }
        Ok(Shape { n, c, h, w })
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn with_channels(self, c: usize) -> Result<Self> {
        Shape::new(self.n, c, self.h, self.w)
    }
}

impl TryFrom<[usize; 4]> for Shape {
    type Error = Error;

    fn try_from(d: [usize; 4]) -> Result<Self> {
        Shape::new(d[0], d[1], d[2], d[3])
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_data(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(format!(
                "shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// I.i.d. normal samples with the given standard deviation.
    pub fn randn(shape: Shape, rng: &mut Rng, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::invalid(format!("randn std must be > 0, got {std}")));
        }
        let data = (0..shape.numel())
            .map(|_| T::from_f64(rng.normal() * std))
            .collect();
        Ok(Tensor { shape, data })
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn uniform(shape: Shape, rng: &mut Rng, lo: f64, hi: f64) -> Self {
        let data = (0..shape.numel())
            .map(|_| T::from_f64(rng.uniform(lo, hi)))
            .collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.index(n, c, h, w)]
    }

    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: T) {
        let i = self.index(n, c, h, w);
        self.data[i] = v;
    }

    /// The `h × w` plane for batch `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    /// Same data, reinterpreted under a shape with equal element count.
    pub fn reshape(&self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.len() {
            return Err(Error::shape(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn mul_scalar(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Sum of elementwise products, accumulated in f64.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.to_f64() * b.to_f64())
            .sum())
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(Element::to_f64(*v))).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "shape mismatch: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn constructors() {
        let z = Tensor::<f64>::zeros(shape(1, 1, 2, 2));
        assert!(z.data().iter().all(|&v| v == 0.0));

        let f = Tensor::<f64>::full(shape(1, 1, 1, 1), 3.5);
        assert_eq!(f.data(), &[3.5]);

        let t = Tensor::<f64>::from_data(shape(1, 2, 1, 1), vec![1.0, 2.0]).unwrap();
        assert_eq!(t.at(0, 0, 0, 0), 1.0);
        assert_eq!(t.at(0, 1, 0, 0), 2.0);
    }

    #[test]
    fn from_data_length_mismatch() {
        let err = Tensor::<f64>::from_data(shape(1, 2, 1, 1), vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Shape::new(1, 0, 2, 2).is_err());
    }

    #[test]
    fn randn_is_deterministic() {
        let s = shape(2, 3, 4, 5);
        let a = Tensor::<f64>::randn(s, &mut Rng::new(7), 1.0).unwrap();
        let b = Tensor::<f64>::randn(s, &mut Rng::new(7), 1.0).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn randn_rejects_zero_std() {
        assert!(Tensor::<f64>::randn(shape(1, 1, 1, 1), &mut Rng::new(0), 0.0).is_err());
    }

    #[test]
    fn randn_sample_mean() {
        // Standard error of the mean for 1e6 unit normals is 1e-3; allow 5 of them.
        let t = Tensor::<f64>::randn(shape(1, 1, 1000, 1000), &mut Rng::new(42), 1.0).unwrap();
        let mean = t.sum() / t.len() as f64;
        assert!(mean.abs() < 5e-3, "mean {mean}");
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
        assert!((var - 1.0).abs() < 1e-2, "var {var}");
    }

    #[test]
    fn arithmetic_identities() {
        let x = Tensor::<f64>::randn(shape(2, 3, 4, 5), &mut Rng::new(1), 1.0).unwrap();
        assert_eq!(x.mul_scalar(1.0), x);
        assert_eq!(x.add(&Tensor::zeros(x.shape())).unwrap(), x);
        assert_eq!(x.sub(&x).unwrap(), Tensor::zeros(x.shape()));
        let y = Tensor::<f64>::zeros(shape(1, 1, 1, 1));
        assert!(x.add(&y).is_err());
    }
}
