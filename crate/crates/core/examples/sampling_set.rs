//! Walk through the pieces of a DySample forward pass: offsets, base grid,
//! sampling set and the final grid sample.
//!
//! cargo run --example sampling_set

use dysample::{build_sampling_set, grid_sample, make_variant, Rng, Shape, Tensor, Variant};

fn main() -> dysample::Result<()> {
    let mut rng = Rng::new(1);
    let x = Tensor::<f64>::randn(Shape::new(1, 16, 3, 3)?, &mut rng, 1.0)?;

    let mut module = make_variant::<f64>(Variant::DySamplePlus, 16, 2)?;
    module.randomize(&mut rng, 0.2)?;

    let offsets = module.generate_offsets(&x)?;
    let base = module.base_grid(&x)?;
    let set = build_sampling_set(&offsets, &base)?;
    println!("offsets      {} ({} groups)", offsets.tensor().shape(), offsets.groups());
    println!("base grid    {}", base.coords().shape());
    println!("sampling set {}", set.coords().shape());

    let gate = module.modulation(&x)?.expect("dynamic scope");
    println!("scope factor range [{:.4}, {:.4}]", gate.min(), gate.max());

    // Children of input pixel (1, 1) in group 0: base position -> sampled position.
    let (g, s) = (base.coords(), set.coords());
    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let (r, c) = (2 + dy, 2 + dx);
        println!(
            "child ({dy},{dx}): ({:.3}, {:.3}) -> ({:.3}, {:.3})",
            g.at(0, 0, r, c),
            g.at(0, 1, r, c),
            s.at(0, 0, r, c),
            s.at(0, 1, r, c)
        );
    }

    let y = grid_sample(&x, &set)?;
    assert_eq!(y, module.forward(&x)?);
    println!("output       {}", y.shape());
    Ok(())
}
