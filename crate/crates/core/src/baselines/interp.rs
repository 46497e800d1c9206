use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

fn check_scale(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::invalid("scale must be >= 1"));
    }
    Ok(())
}

/// `out(i, j) = in(⌊i/s⌋, ⌊j/s⌋)`.
pub fn nearest_upsample<T: Element>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    check_scale(s)?;
    let xs = x.shape();
    let os = Shape::new(xs.n, xs.c, xs.h * s, xs.w * s)?;
    let mut out = Tensor::zeros(os);
    out.data_mut()
        .par_chunks_mut(os.plane())
        .enumerate()
        .for_each(|(idx, dst)| {
            let src = x.plane(idx / xs.c, idx % xs.c);
            for (i, row) in dst.chunks_mut(os.w).enumerate() {
                let srow = &src[(i / s) * xs.w..(i / s + 1) * xs.w];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = srow[j / s];
                }
            }
        });
    Ok(out)
}

/// Source index pair and blend weight along one axis, half-pixel centered
/// with edge clamping (align-corners false).
fn axis_taps(len: usize, s: usize) -> Vec<(usize, usize, f64)> {
    (0..len * s)
        .map(|i| {
            let src = ((i as f64 + 0.5) / s as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            let lambda = if i0 == len - 1 { 0.0 } else { src - i0 as f64 };
            (i0, i1, lambda)
        })
        .collect()
}

/// Separable bilinear interpolation by an integer factor.
pub fn bilinear_upsample<T: Element>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    check_scale(s)?;
    let xs = x.shape();
    let os = Shape::new(xs.n, xs.c, xs.h * s, xs.w * s)?;
    let rows = axis_taps(xs.h, s);
    let cols: Vec<(usize, usize, T)> = axis_taps(xs.w, s)
        .into_iter()
        .map(|(a, b, l)| (a, b, T::from_f64(l)))
        .collect();
    let mut out = Tensor::zeros(os);
    out.data_mut()
        .par_chunks_mut(os.plane())
        .enumerate()
        .for_each(|(idx, dst)| {
            let src = x.plane(idx / xs.c, idx % xs.c);
            let one = T::one();
            for (row, &(r0, r1, ly)) in dst.chunks_mut(os.w).zip(&rows) {
                let ly = T::from_f64(ly);
                let a = &src[r0 * xs.w..(r0 + 1) * xs.w];
                let b = &src[r1 * xs.w..(r1 + 1) * xs.w];
                for (v, &(c0, c1, lx)) in row.iter_mut().zip(&cols) {
                    let top = (one - lx) * a[c0] + lx * a[c1];
                    let bottom = (one - lx) * b[c0] + lx * b[c1];
                    *v = (one - ly) * top + ly * bottom;
                }
            }
        });
    Ok(out)
}
