//! Parameter increments for the detector/segmenter presets and a FLOP
//! breakdown per operator.
//!
//! cargo run --example complexity_tables

use dysample::analysis::complexity::{count_flops, count_params};
use dysample::cli::preset_table;
use dysample::{OpKind, Rng, Shape, Upsampler};

fn main() -> dysample::Result<()> {
    for preset in ["fpn4", "segformer6", "pfpn3"] {
        let cells: Vec<String> = preset_table(preset, 256)?
            .into_iter()
            .map(|(v, p)| format!("{v} +{p}"))
            .collect();
        println!("{preset:<11} {}", cells.join(", "));
    }

    let input = Shape::new(1, 256, 120, 120)?;
    println!("\nFLOPs at {input}, scale 2 (multiply-add = 2)");
    for kind in OpKind::ALL {
        let op = Upsampler::<f32>::build(kind, 256, 2, &mut Rng::new(0))?;
        let f = count_flops(&op, input)?;
        let terms: Vec<String> = f.terms.iter().map(|(n, v)| format!("{n}={:.1}M", *v as f64 / 1e6)).collect();
        println!(
            "{:<12} params {:>8}  total {:>8.1}M  [{}]",
            kind.name(),
            count_params(&op),
            f.total() as f64 / 1e6,
            terms.join(" ")
        );
    }
    Ok(())
}
