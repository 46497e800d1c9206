use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[inline]
fn sigmoid_scalar<T: Element>(v: T) -> T {
    let one = T::one();
    if v >= T::zero() {
        one / (one + (-v).exp())
    } else {
        let e = v.exp();
        e / (one + e)
    }
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Gradient through the sigmoid, given its output `y`.
pub fn sigmoid_backward<T: Element>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    y.zip_map(grad_out, |y, g| g * y * (T::one() - y))
}

fn check_groups(c: usize, group_size: usize) -> Result<()> {
    if group_size == 0 || c % group_size != 0 {
        return Err(Error::shape(format!(
            "softmax group size {group_size} does not divide {c} channels"
        )));
    }
    Ok(())
}

/// Softmax over each run of `group_size` consecutive channels, per pixel.
pub fn softmax_channels<T: Element>(x: &Tensor<T>, group_size: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    check_groups(s.c, group_size)?;
    let plane = s.plane();
    let mut out = Tensor::zeros(s);
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..s.n {
        for g in 0..s.c / group_size {
            let base = (b * s.c + g * group_size) * plane;
            for p in 0..plane {
                let at = |k: usize| base + k * plane + p;
                let m = (0..group_size).map(|k| src[at(k)]).fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for k in 0..group_size {
                    let e = (src[at(k)] - m).exp();
                    dst[at(k)] = e;
                    total += e;
                }
                for k in 0..group_size {
                    dst[at(k)] = dst[at(k)] / total;
                }
            }
        }
    }
    Ok(out)
}

/// Gradient through [`softmax_channels`], given its output `y`.
pub fn softmax_channels_backward<T: Element>(
    y: &Tensor<T>,
    grad_out: &Tensor<T>,
    group_size: usize,
) -> Result<Tensor<T>> {
    y.check_same_shape(grad_out)?;
    let s = y.shape();
    check_groups(s.c, group_size)?;
    let plane = s.plane();
    let mut out = Tensor::zeros(s);
    let (yd, gd) = (y.data(), grad_out.data());
    let dst = out.data_mut();
    for b in 0..s.n {
        for g in 0..s.c / group_size {
            let base = (b * s.c + g * group_size) * plane;
            for p in 0..plane {
                let at = |k: usize| base + k * plane + p;
                let inner: T = (0..group_size).map(|k| yd[at(k)] * gd[at(k)]).sum();
                for k in 0..group_size {
                    dst[at(k)] = yd[at(k)] * (gd[at(k)] - inner);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Rng, Shape};

    #[test]
    fn sigmoid_at_zero() {
        let x = Tensor::<f64>::zeros(Shape::new(1, 1, 1, 1).unwrap());
        assert_eq!(sigmoid(&x).data(), &[0.5]);
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        let x = Tensor::<f64>::from_data(Shape::new(1, 2, 1, 1).unwrap(), vec![-800.0, 800.0]).unwrap();
        let y = sigmoid(&x);
        assert!(y.all_finite());
        assert_eq!(y.data()[1], 1.0);
    }

    #[test]
    fn softmax_uniform_group() {
        let x = Tensor::<f64>::full(Shape::new(1, 25, 2, 2).unwrap(), 0.3);
        let y = softmax_channels(&x, 25).unwrap();
        for &v in y.data() {
            assert!((v - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_groups_sum_to_one() {
        let x = Tensor::<f64>::randn(Shape::new(2, 18, 3, 3).unwrap(), &mut Rng::new(8), 3.0).unwrap();
        let y = softmax_channels(&x, 9).unwrap();
        for b in 0..2 {
            for g in 0..2 {
                for p in 0..9 {
                    let total: f64 = (0..9).map(|k| y.plane(b, g * 9 + k)[p]).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(y.data().iter().all(|&v| v >= 0.0));
        assert!(softmax_channels(&x, 4).is_err());
    }
}
