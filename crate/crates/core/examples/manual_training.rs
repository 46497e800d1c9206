//! Use the backward pass directly: fit a DySample-S+ module so that its
//! output matches a target produced by a second, randomly initialized module.
//!
//! cargo run --release --example manual_training

use dysample::layers::sgd_step;
use dysample::{make_variant, Rng, Shape, Tensor, Variant};

fn main() -> dysample::Result<()> {
    let mut rng = Rng::new(11);
    let x = Tensor::<f64>::randn(Shape::new(2, 32, 6, 6)?, &mut rng, 1.0)?;

    let mut teacher = make_variant::<f64>(Variant::DySampleSPlus, 32, 2)?;
    teacher.randomize(&mut rng, 0.3)?;
    let target = teacher.forward(&x)?;

    let mut student = make_variant::<f64>(Variant::DySampleSPlus, 32, 2)?;
    // The fresh student has zero offsets, so it starts as plain bilinear.
    for step in 0..=200 {
        let y = student.forward(&x)?;
        let diff = y.sub(&target)?;
        let loss = diff.dot(&diff)? / diff.len() as f64;
        if step % 40 == 0 {
            println!("step {step:>3}  mse {loss:.6}");
        }
        let grads = student.backward(&x, &diff.mul_scalar(2.0 / diff.len() as f64))?;
        let g: Vec<Tensor> = grads.params().into_iter().cloned().collect();
        sgd_step(student.parameters_mut(), &g.iter().collect::<Vec<_>>(), 2.0)?;
    }
    Ok(())
}
