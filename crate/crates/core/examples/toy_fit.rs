//! Train each DySample variant to recover sharp region boundaries from a
//! box-downsampled map, and compare with fixed bilinear upsampling.
//!
//! cargo run --release --example toy_fit

use dysample::analysis::fit::{toy_fit, EdgeTask, DEFAULT_FIT_LR};
use dysample::{make_variant, Variant};

fn main() -> dysample::Result<()> {
    let task = EdgeTask::generate(32, 64, 2, 0)?;
    for v in Variant::ALL {
        let mut module = make_variant::<f64>(v, 32, 2)?;
        let r = toy_fit(&mut module, &task, 300, DEFAULT_FIT_LR)?;
        let checkpoints: Vec<String> = [0, 50, 100, 200, 300].iter().map(|&i| format!("{:.5}", r.losses[i])).collect();
        println!(
            "{:<12} loss {}  bilinear {:.5}  ratio {:.3}",
            v.name(),
            checkpoints.join(" -> "),
            r.bilinear_mse,
            r.last() / r.bilinear_mse
        );
    }
    Ok(())
}
