//! Bilinear point sampling.
//!
//! Coordinates are in input-pixel units: pixel centers sit at integer
//! positions `0..W-1` (x) and `0..H-1` (y). Out-of-range coordinates are
//! clamped to the border before the four neighbors are looked up.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// Initial position of the `s²` children of each low-res pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitMode {
    /// All children start on the parent center.
    Nearest,
    /// Children spread evenly, half-pixel centered.
    Bilinear,
}

/// Per-output-pixel source coordinates, one `(x, y)` channel pair per group.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingGrid<T = f64> {
    coords: Tensor<T>,
    groups: usize,
}

impl<T: Element> SamplingGrid<T> {
    pub fn new(coords: Tensor<T>) -> Result<Self> {
        let c = coords.shape().c;
        if c % 2 != 0 {
            return Err(Error::shape(format!(
                "sampling grid needs an even channel count, got {c}"
            )));
        }
        Ok(SamplingGrid {
            coords,
            groups: c / 2,
        })
    }

    pub fn coords(&self) -> &Tensor<T> {
        &self.coords
    }

    pub fn into_coords(self) -> Tensor<T> {
        self.coords
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Batch, output height, output width.
    pub fn extent(&self) -> (usize, usize, usize) {
        let s = self.coords.shape();
        (s.n, s.h, s.w)
    }
}

/// Base grid of size `s·h × s·w` with a single coordinate group.
pub fn make_base_grid<T: Element>(h: usize, w: usize, s: usize, mode: InitMode) -> Result<SamplingGrid<T>> {
    if s == 0 {
        return Err(Error::invalid("scale must be >= 1"));
    }
    let (oh, ow) = (h * s, w * s);
    let mut coords = Tensor::zeros(Shape::new(1, 2, oh, ow)?);
    let sf = s as f64;
    let pos = |i: usize| -> f64 {
        match mode {
            InitMode::Bilinear => (i as f64 + 0.5) / sf - 0.5,
            InitMode::Nearest => (i / s) as f64,
        }
    };
    for i in 0..oh {
        let y = T::from_f64(pos(i));
        for j in 0..ow {
            coords.set(0, 0, i, j, T::from_f64(pos(j)));
            coords.set(0, 1, i, j, y);
        }
    }
    SamplingGrid::new(coords)
}

/// Neighbor indices and blend weights for one sampling point.
#[derive(Clone, Copy, Debug)]
struct Tap<T> {
    i00: usize,
    i01: usize,
    i10: usize,
    i11: usize,
    fx: T,
    fy: T,
    /// Whether x / y fell inside the valid range (gradient passes through).
    x_inside: bool,
    y_inside: bool,
}

impl<T: Element> Tap<T> {
    #[inline]
    fn new(x: T, y: T, h: usize, w: usize) -> Self {
        let xmax = T::from_f64((w - 1) as f64);
        let ymax = T::from_f64((h - 1) as f64);
        let x_inside = x >= T::zero() && x <= xmax;
        let y_inside = y >= T::zero() && y <= ymax;
        let xc = x.max(T::zero()).min(xmax);
        let yc = y.max(T::zero()).min(ymax);
        let x0f = xc.floor();
        let y0f = yc.floor();
        let x0 = x0f.to_usize().unwrap_or(0).min(w - 1);
        let y0 = y0f.to_usize().unwrap_or(0).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        Tap {
            i00: y0 * w + x0,
            i01: y0 * w + x1,
            i10: y1 * w + x0,
            i11: y1 * w + x1,
            fx: xc - x0f,
            fy: yc - y0f,
            x_inside,
            y_inside,
        }
    }

    #[inline]
    fn weights(&self) -> [T; 4] {
        let one = T::one();
        [
            (one - self.fx) * (one - self.fy),
            self.fx * (one - self.fy),
            (one - self.fx) * self.fy,
            self.fx * self.fy,
        ]
    }

    #[inline]
    fn sample(&self, plane: &[T]) -> T {
        let [w00, w01, w10, w11] = self.weights();
        w00 * plane[self.i00] + w01 * plane[self.i01] + w10 * plane[self.i10] + w11 * plane[self.i11]
    }
}

struct Geometry {
    n: usize,
    c: usize,
    h_in: usize,
    w_in: usize,
    h_out: usize,
    w_out: usize,
    groups: usize,
    grid_batched: bool,
}

impl Geometry {
    fn of<T: Element>(x: &Tensor<T>, grid: &SamplingGrid<T>) -> Result<Self> {
        let xs = x.shape();
        let gs = grid.coords.shape();
        if xs.c % grid.groups != 0 {
            return Err(Error::shape(format!(
                "grid_sample: {} channels not divisible into {} coordinate groups",
                xs.c, grid.groups
            )));
        }
        if gs.n != xs.n && gs.n != 1 {
            return Err(Error::shape(format!(
                "grid_sample: grid batch {} does not match input batch {}",
                gs.n, xs.n
            )));
        }
        Ok(Geometry {
            n: xs.n,
            c: xs.c,
            h_in: xs.h,
            w_in: xs.w,
            h_out: gs.h,
            w_out: gs.w,
            groups: grid.groups,
            grid_batched: gs.n == xs.n && gs.n > 1,
        })
    }

    fn out_shape(&self) -> Result<Shape> {
        Shape::new(self.n, self.c, self.h_out, self.w_out)
    }

    fn taps<T: Element>(&self, grid: &SamplingGrid<T>, b: usize, k: usize) -> Result<Vec<Tap<T>>> {
        let gb = if self.grid_batched { b } else { 0 };
        let xs = grid.coords.plane(gb, 2 * k);
        let ys = grid.coords.plane(gb, 2 * k + 1);
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(Error::NonFinite("sampling coordinate".into()));
                }
                Ok(Tap::new(x, y, self.h_in, self.w_in))
            })
            .collect()
    }
}

/// Samples `x` at the grid's coordinates. Channel group `k` of `x` (of
/// `c / g` consecutive channels) uses coordinate pair `k`.
pub fn grid_sample<T: Element>(x: &Tensor<T>, grid: &SamplingGrid<T>) -> Result<Tensor<T>> {
    let geo = Geometry::of(x, grid)?;
    let mut out = Tensor::zeros(geo.out_shape()?);
    let cg = geo.c / geo.groups;
    let out_plane = geo.h_out * geo.w_out;
    let in_plane = geo.h_in * geo.w_in;

    // One chunk per (batch, group): channels of a group are contiguous.
    out.data_mut()
        .par_chunks_mut(cg * out_plane)
        .enumerate()
        .try_for_each(|(idx, chunk)| -> Result<()> {
            let (b, k) = (idx / geo.groups, idx % geo.groups);
            let taps = geo.taps(grid, b, k)?;
            for (ci, dst) in chunk.chunks_mut(out_plane).enumerate() {
                let ch = k * cg + ci;
                let start = (b * geo.c + ch) * in_plane;
                let plane = &x.data()[start..start + in_plane];
                for (o, tap) in dst.iter_mut().zip(&taps) {
                    *o = tap.sample(plane);
                }
            }
            Ok(())
        })?;
    Ok(out)
}

/// Gradients of [`grid_sample`] with respect to the feature map and the
/// sampling coordinates. A coordinate component that was clamped receives a
/// zero gradient.
pub fn grid_sample_backward<T: Element>(
    x: &Tensor<T>,
    grid: &SamplingGrid<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let geo = Geometry::of(x, grid)?;
    if grad_out.shape() != geo.out_shape()? {
        return Err(Error::shape(format!(
            "grid_sample_backward: grad_out {} does not match output {}",
            grad_out.shape(),
            geo.out_shape()?
        )));
    }
    let cg = geo.c / geo.groups;
    let out_plane = geo.h_out * geo.w_out;
    let in_plane = geo.h_in * geo.w_in;
    let tasks = geo.n * geo.groups;

    let partials: Vec<(Vec<T>, Vec<T>)> = (0..tasks)
        .into_par_iter()
        .map(|idx| -> Result<(Vec<T>, Vec<T>)> {
            let (b, k) = (idx / geo.groups, idx % geo.groups);
            let taps = geo.taps(grid, b, k)?;
            let mut gx = vec![T::zero(); cg * in_plane];
            let mut gcoord = vec![T::zero(); 2 * out_plane];
            let (gcx, gcy) = gcoord.split_at_mut(out_plane);
            for ci in 0..cg {
                let ch = k * cg + ci;
                let start = (b * geo.c + ch) * in_plane;
                let plane = &x.data()[start..start + in_plane];
                let gstart = (b * geo.c + ch) * out_plane;
                let g_plane = &grad_out.data()[gstart..gstart + out_plane];
                let gx_plane = &mut gx[ci * in_plane..(ci + 1) * in_plane];
                for (p, (tap, &g)) in taps.iter().zip(g_plane).enumerate() {
                    let [w00, w01, w10, w11] = tap.weights();
                    gx_plane[tap.i00] += w00 * g;
                    gx_plane[tap.i01] += w01 * g;
                    gx_plane[tap.i10] += w10 * g;
                    gx_plane[tap.i11] += w11 * g;
                    let (v00, v01, v10, v11) =
                        (plane[tap.i00], plane[tap.i01], plane[tap.i10], plane[tap.i11]);
                    let one = T::one();
                    if tap.x_inside {
                        gcx[p] += g * ((one - tap.fy) * (v01 - v00) + tap.fy * (v11 - v10));
                    }
                    if tap.y_inside {
                        gcy[p] += g * ((one - tap.fx) * (v10 - v00) + tap.fx * (v11 - v01));
                    }
                }
            }
            Ok((gx, gcoord))
        })
        .collect::<Result<_>>()?;

    let mut grad_x = Tensor::zeros(x.shape());
    let coord_shape = Shape::new(geo.n, 2 * geo.groups, geo.h_out, geo.w_out)?;
    let mut grad_coords = Tensor::zeros(coord_shape);
    for (idx, (gx, gc)) in partials.into_iter().enumerate() {
        let (b, k) = (idx / geo.groups, idx % geo.groups);
        let xs = (b * geo.c + k * cg) * in_plane;
        grad_x.data_mut()[xs..xs + gx.len()].copy_from_slice(&gx);
        let cs = (b * 2 * geo.groups + 2 * k) * out_plane;
        grad_coords.data_mut()[cs..cs + gc.len()].copy_from_slice(&gc);
    }
    Ok((grad_x, grad_coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn bilinear_base_grid_scale_two() {
        let g = make_base_grid::<f64>(1, 1, 2, InitMode::Bilinear).unwrap();
        let c = g.coords();
        assert_eq!(c.plane(0, 0), &[-0.25, 0.25, -0.25, 0.25]);
        assert_eq!(c.plane(0, 1), &[-0.25, -0.25, 0.25, 0.25]);
    }

    #[test]
    fn nearest_base_grid_scale_two() {
        let g = make_base_grid::<f64>(1, 1, 2, InitMode::Nearest).unwrap();
        assert!(g.coords().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scale_one_grid_is_identity() {
        for mode in [InitMode::Nearest, InitMode::Bilinear] {
            let g = make_base_grid::<f64>(3, 4, 1, mode).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    assert_eq!(g.coords().at(0, 0, i, j), j as f64);
                    assert_eq!(g.coords().at(0, 1, i, j), i as f64);
                }
            }
        }
    }

    #[test]
    fn identity_sampling_is_exact() {
        let x = Tensor::<f64>::randn(shape(2, 6, 4, 5), &mut Rng::new(3), 1.0).unwrap();
        let g = make_base_grid(4, 5, 1, InitMode::Bilinear).unwrap();
        assert_eq!(grid_sample(&x, &g).unwrap(), x);
    }

    #[test]
    fn single_pixel_input_is_constant() {
        let x = Tensor::<f64>::full(shape(1, 2, 1, 1), 1.75);
        let coords = Tensor::uniform(shape(1, 2, 3, 3), &mut Rng::new(9), -3.0, 3.0);
        let out = grid_sample(&x, &SamplingGrid::new(coords).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn center_of_two_by_two() {
        let x = Tensor::<f64>::from_data(shape(1, 1, 2, 2), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let coords = Tensor::from_data(shape(1, 2, 1, 1), vec![0.5, 0.5]).unwrap();
        let out = grid_sample(&x, &SamplingGrid::new(coords).unwrap()).unwrap();
        assert_eq!(out.data(), &[1.5]);
    }

    #[test]
    fn group_mismatch_is_error() {
        let x = Tensor::<f64>::zeros(shape(1, 3, 2, 2));
        let coords = Tensor::zeros(shape(1, 4, 2, 2));
        assert!(grid_sample(&x, &SamplingGrid::new(coords).unwrap()).is_err());
        assert!(SamplingGrid::new(Tensor::<f64>::zeros(shape(1, 3, 2, 2))).is_err());
    }

    #[test]
    fn constant_field_has_zero_coordinate_gradient() {
        let x = Tensor::<f64>::full(shape(1, 2, 4, 4), 2.0);
        let coords = Tensor::uniform(shape(1, 2, 5, 5), &mut Rng::new(1), 0.1, 2.9);
        let g = SamplingGrid::new(coords).unwrap();
        let grad_out = Tensor::randn(shape(1, 2, 5, 5), &mut Rng::new(2), 1.0).unwrap();
        let (_, gc) = grid_sample_backward(&x, &g, &grad_out).unwrap();
        assert!(gc.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_grid_passes_gradient_through() {
        let x = Tensor::<f64>::randn(shape(1, 3, 4, 4), &mut Rng::new(4), 1.0).unwrap();
        let g = make_base_grid(4, 4, 1, InitMode::Nearest).unwrap();
        let grad_out = Tensor::randn(x.shape(), &mut Rng::new(5), 1.0).unwrap();
        let (gx, _) = grid_sample_backward(&x, &g, &grad_out).unwrap();
        assert_eq!(gx, grad_out);
    }

    #[test]
    fn clamped_coordinates_get_zero_gradient() {
        let x = Tensor::<f64>::randn(shape(1, 1, 3, 3), &mut Rng::new(6), 1.0).unwrap();
        let coords =
            Tensor::from_data(shape(1, 2, 1, 2), vec![-0.7, 1.3, 0.6, 2.8]).unwrap();
        let g = SamplingGrid::new(coords).unwrap();
        let grad_out = Tensor::full(shape(1, 1, 1, 2), 1.0);
        let (_, gc) = grid_sample_backward(&x, &g, &grad_out).unwrap();
        assert_eq!(gc.at(0, 0, 0, 0), 0.0);
        assert_ne!(gc.at(0, 0, 0, 1), 0.0);
        assert_ne!(gc.at(0, 1, 0, 0), 0.0);
    }

    #[test]
    fn grad_out_shape_checked() {
        let x = Tensor::<f64>::zeros(shape(1, 1, 2, 2));
        let g = make_base_grid(2, 2, 2, InitMode::Bilinear).unwrap();
        assert!(grid_sample_backward(&x, &g, &Tensor::zeros(shape(1, 1, 2, 2))).is_err());
    }
}
