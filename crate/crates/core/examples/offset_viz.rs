//! Train briefly on the edge task and draw where the sampling points moved.
//!
//! cargo run --release --example offset_viz [out.svg]

use dysample::analysis::fit::{toy_fit, EdgeTask};
use dysample::viz::{offset_arrows, offset_field_svg, VizOptions};
use dysample::{make_variant, Variant};

fn main() -> dysample::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "offsets.svg".into());
    let task = EdgeTask::generate(32, 32, 2, 3)?;
    let mut module = make_variant::<f64>(Variant::DySample, 32, 2)?;
    toy_fit(&mut module, &task, 200, 1.0)?;

    let opts = VizOptions { extent: (16, 16), cell: 32.0, ..VizOptions::default() };
    let arrows = offset_arrows(&module, &task.input, &opts)?;
    let longest = arrows.iter().map(|a| a.length()).fold(0.0, f64::max);
    std::fs::write(&out, offset_field_svg(&module, &task.input, &opts)?)
        .map_err(|e| dysample::Error::Io { path: out.clone().into(), source: e })?;
    println!("{} arrows, longest {:.3} px, written to {out}", arrows.len(), longest);
    Ok(())
}
