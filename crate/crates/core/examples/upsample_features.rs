//! Upsample a random feature map with every operator and compare against
//! bilinear interpolation.
//!
//! cargo run --example upsample_features

use dysample::baselines::bilinear_upsample;
use dysample::{OpKind, Rng, Shape, Tensor, Upsampler};

fn main() -> dysample::Result<()> {
    let mut rng = Rng::new(0);
    let x = Tensor::<f64>::randn(Shape::new(1, 64, 16, 16)?, &mut rng, 1.0)?;
    let reference = bilinear_upsample(&x, 2)?;

    println!("{:<14} {:>16} {:>14}", "op", "output", "max |y - bil|");
    for kind in OpKind::ALL {
        let op = Upsampler::build(kind, 64, 2, &mut rng)?;
        let y = op.forward(&x)?;
        println!(
            "{:<14} {:>16} {:>14.3e}",
            kind.name(),
            y.shape().to_string(),
            y.max_abs_diff(&reference)?
        );
    }
    // Fresh DySample modules start from the bilinear grid, so their rows read 0.
    Ok(())
}
