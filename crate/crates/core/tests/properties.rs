use proptest::prelude::*;

use dysample::analysis::complexity::count_flops;
use dysample::baselines::{bilinear_upsample, nearest_upsample};
use dysample::io::npy::{decode, encode};
use dysample::layers::{Conv2dLayer, Deconv2dLayer};
use dysample::{
    grid_sample, make_base_grid, make_variant, InitMode, OpKind, Rng, SamplingGrid, Shape, Tensor, Upsampler, Variant,
};

fn randn(shape: Shape, seed: u64) -> Tensor {
    Tensor::randn(shape, &mut Rng::new(seed), 1.0).unwrap()
}

/// Coordinates up to two pixels outside an `h × w` map.
fn random_grid(n: usize, g: usize, hh: usize, ww: usize, h: usize, w: usize, seed: u64) -> SamplingGrid {
    let mut rng = Rng::new(seed);
    let mut coords = Tensor::zeros(Shape::new(n, 2 * g, hh, ww).unwrap());
    for b in 0..n {
        for k in 0..g {
            for i in 0..hh {
                for j in 0..ww {
                    coords.set(b, 2 * k, i, j, rng.uniform(-2.0, w as f64 + 1.0));
                    coords.set(b, 2 * k + 1, i, j, rng.uniform(-2.0, h as f64 + 1.0));
                }
            }
        }
    }
    SamplingGrid::new(coords).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_round_trip(s in 1usize..4, k in 1usize..4, n in 1usize..3, h in 1usize..6, w in 1usize..6, seed: u64) {
        let x = randn(Shape::new(n, k * s * s, h, w).unwrap(), seed);
        let up = x.pixel_shuffle(s).unwrap();
        prop_assert_eq!(up.shape(), Shape::new(n, k, h * s, w * s).unwrap());
        prop_assert_eq!(up.pixel_unshuffle(s).unwrap(), x);
    }

    #[test]
    fn grid_sample_is_linear_in_x(g in 1usize..3, h in 1usize..6, w in 1usize..6, a in -2.0f64..2.0, seed: u64) {
        let c = 2 * g;
        let x1 = randn(Shape::new(1, c, h, w).unwrap(), seed);
        let x2 = randn(Shape::new(1, c, h, w).unwrap(), seed ^ 1);
        let grid = random_grid(1, g, 3, 4, h, w, seed ^ 2);
        let lhs = grid_sample(&x1.mul_scalar(a).add(&x2).unwrap(), &grid).unwrap();
        let rhs = grid_sample(&x1, &grid).unwrap().mul_scalar(a).add(&grid_sample(&x2, &grid).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn grid_sample_is_convex(h in 1usize..6, w in 1usize..6, seed: u64) {
        let x = randn(Shape::new(1, 1, h, w).unwrap(), seed);
        let y = grid_sample(&x, &random_grid(1, 1, 4, 4, h, w, seed ^ 3)).unwrap();
        prop_assert!(y.min() >= x.min() - 1e-12 && y.max() <= x.max() + 1e-12);
    }

    #[test]
    fn groups_sample_independently(g in 1usize..4, per in 1usize..3, h in 1usize..5, w in 1usize..5, seed: u64) {
        let x = randn(Shape::new(1, g * per, h, w).unwrap(), seed);
        let grid = random_grid(1, g, 3, 3, h, w, seed ^ 4);
        let whole = grid_sample(&x, &grid).unwrap();
        let xs = x.split_channels(g).unwrap();
        let cs = grid.coords().split_channels(g).unwrap();
        let parts: Vec<Tensor> = xs
            .iter()
            .zip(cs)
            .map(|(xg, cg)| grid_sample(xg, &SamplingGrid::new(cg).unwrap()).unwrap())
            .collect();
        prop_assert_eq!(whole, Tensor::concat_channels(&parts).unwrap());
    }

    #[test]
    fn base_grids_reproduce_baselines(s in 1usize..5, c in 1usize..4, h in 1usize..7, w in 1usize..7, seed: u64) {
        let x = randn(Shape::new(1, c, h, w).unwrap(), seed);
        let b = grid_sample(&x, &make_base_grid(h, w, s, InitMode::Bilinear).unwrap()).unwrap();
        prop_assert!(b.max_abs_diff(&bilinear_upsample(&x, s).unwrap()).unwrap() <= 1e-12);
        let nn = grid_sample(&x, &make_base_grid(h, w, s, InitMode::Nearest).unwrap()).unwrap();
        prop_assert_eq!(nn, nearest_upsample(&x, s).unwrap());
    }

    #[test]
    fn fresh_variants_are_bilinear(v in prop::sample::select(Variant::ALL.to_vec()), h in 1usize..6, w in 1usize..6, seed: u64) {
        let x = randn(Shape::new(1, 32, h, w).unwrap(), seed);
        let m = make_variant::<f64>(v, 32, 2).unwrap();
        prop_assert!(m.forward(&x).unwrap().max_abs_diff(&bilinear_upsample(&x, 2).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn npy_bitwise_round_trip(n in 1usize..3, c in 1usize..4, h in 1usize..4, w in 1usize..4, seed: u64) {
        let mut rng = Rng::new(seed);
        let shape = Shape::new(n, c, h, w).unwrap();
        // arbitrary bit patterns, NaNs and infinities included
        let data: Vec<f64> = (0..shape.numel()).map(|_| f64::from_bits(rng.next_u64())).collect();
        let t = Tensor::from_data(shape, data).unwrap();
        let back = decode(&encode(&t)).unwrap().to_f64();
        prop_assert!(t.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn deconv_is_adjoint_of_conv(ci in 1usize..4, co in 1usize..4, h in 2usize..6, w in 2usize..6, seed: u64) {
        let mut rng = Rng::new(seed);
        let conv = Conv2dLayer::fan_in(co, ci, 3, 2, 1, false, &mut rng).unwrap();
        // same weight tensor read as (c_in, c_out, k, k) for the transpose
        let deconv = Deconv2dLayer::new(conv.weight.clone(), None, 2, 1, 1).unwrap();
        let x = randn(Shape::new(1, ci, h, w).unwrap(), seed ^ 5);
        let y = deconv.forward(&x).unwrap();
        let z = randn(y.shape().with_channels(co).unwrap(), seed ^ 6);
        let lhs = y.dot(&z).unwrap();
        let rhs = conv.forward(&z).unwrap().dot(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn flops_additive_over_batch(k in prop::sample::select(OpKind::ALL.to_vec()), n in 1usize..4, h in 1usize..9) {
        let op = Upsampler::<f64>::build(k, 32, 2, &mut Rng::new(0)).unwrap();
        let one = count_flops(&op, Shape::new(1, 32, h, h).unwrap()).unwrap().total();
        let many = count_flops(&op, Shape::new(n, 32, h, h).unwrap()).unwrap().total();
        prop_assert_eq!(many, one * n as u64);
    }
}
