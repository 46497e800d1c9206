//! Write tensors and weights to disk, read them back, and upsample with the
//! loaded weights.
//!
//! cargo run --example tensor_files

use dysample::io::{load_weights, read_npy, save_weights, weights::read_manifest, write_npy};
use dysample::{OpKind, Rng, Shape, Tensor, Upsampler, Variant};

fn main() -> dysample::Result<()> {
    let dir = std::env::temp_dir().join("dysample-tensor-files");
    let mut rng = Rng::new(7);

    let x = Tensor::<f32>::randn(Shape::new(1, 32, 8, 8)?, &mut rng, 1.0)?;
    let path = dir.join("x.npy");
    std::fs::create_dir_all(&dir).map_err(|e| dysample::Error::Io { path: dir.clone(), source: e })?;
    write_npy(&path, &x)?;
    let back = read_npy(&path)?;
    println!("{}: {} {}", path.display(), back.dtype(), back.shape());
    assert_eq!(back.cast::<f32>(), x);

    let mut op = Upsampler::<f32>::build(OpKind::DySample(Variant::DySampleSPlus), 32, 2, &mut rng)?;
    if let Upsampler::DySample(m) = &mut op {
        m.randomize(&mut rng, 0.05)?;
    }
    let wdir = dir.join("weights");
    save_weights(&wdir, &op)?;
    for (name, file) in read_manifest(&wdir)? {
        println!("  {name:<20} {file}");
    }

    let mut fresh = Upsampler::<f32>::build(OpKind::DySample(Variant::DySampleSPlus), 32, 2, &mut rng)?;
    load_weights(&wdir, &mut fresh)?;
    assert_eq!(fresh.forward(&x)?, op.forward(&x)?);
    println!("reloaded weights reproduce the output");
    Ok(())
}
