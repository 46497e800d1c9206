//! Time the forward pass of several operators on one thread.
//!
//! cargo run --release --example latency_bench [h]
//!
//! `h` defaults to 60; the reference protocol uses 120.

use dysample::analysis::bench::{bench, BenchSpec};
use dysample::{OpKind, Shape, Variant};

fn main() -> dysample::Result<()> {
    let h: usize = std::env::args().nth(1).map_or(60, |a| a.parse().expect("h must be an integer"));
    let mut spec = BenchSpec::new(Shape::new(1, 256, h, h)?);
    spec.threads = 1;
    spec.iters = 10;
    let ops = [
        OpKind::Bilinear,
        OpKind::DySample(Variant::DySample),
        OpKind::DySample(Variant::DySamplePlus),
        OpKind::DySample(Variant::DySampleS),
        OpKind::DySample(Variant::DySampleSPlus),
        OpKind::Carafe,
    ];
    for kind in ops {
        let r = bench(kind, &spec)?;
        let l = r.latency.expect("timed run");
        println!(
            "{:<12} median {:>8.2} ms  p95 {:>8.2} ms  {:>6.2} GFLOP",
            r.name,
            l.median_ns as f64 / 1e6,
            l.p95_ns as f64 / 1e6,
            r.flop_count as f64 / 1e9
        );
    }
    Ok(())
}
