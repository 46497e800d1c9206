//! Single-process latency measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::alloc;
use crate::analysis::complexity::{count_flops, count_params};
use crate::error::{Error, Result};
use crate::tensor::{DType, Element, Rng, Shape, Tensor};
use crate::upsampler::{OpKind, Upsampler};

/// Environment variable overriding the benchmark thread count.
pub const THREADS_ENV: &str = "RESAMPLE_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSpec {
    pub shape: Shape,
    pub scale: usize,
    pub warmup: usize,
    pub iters: usize,
    pub seed: u64,
    pub threads: usize,
    pub dtype: DType,
}

impl BenchSpec {
    pub fn new(shape: Shape) -> Self {
        BenchSpec {
            shape,
            scale: 2,
            warmup: 3,
            iters: 20,
            seed: 0,
            threads: threads_from_env().unwrap_or(1),
            dtype: DType::F32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::invalid("iters must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads must be >= 1"));
        }
        if self.scale == 0 {
            return Err(Error::invalid("scale must be >= 1"));
        }
        Ok(())
    }
}

/// Thread count from the environment, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_ns: u64,
    pub p95_ns: u64,
    pub iters: usize,
}

impl LatencyStats {
    /// Median (mean of the two middle values for even counts) and
    /// nearest-rank 95th percentile.
    pub fn from_samples(samples: &[u64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no latency samples"));
        }
        let mut s = samples.to_vec();
        s.sort_unstable();
        let n = s.len();
        let median_ns = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2 };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Ok(LatencyStats {
            median_ns,
            p95_ns: s[rank - 1],
            iters: n,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub name: String,
    pub shape: Shape,
    pub scale: usize,
    pub param_count: u64,
    pub flop_count: u64,
    pub latency: Option<LatencyStats>,
    pub memory_delta_bytes: Option<u64>,
}

fn bench_typed<T: Element>(kind: OpKind, spec: &BenchSpec) -> Result<ComplexityReport> {
    let mut rng = Rng::new(spec.seed);
    let op = Upsampler::<T>::build(kind, spec.shape.c, spec.scale, &mut rng)?;
    let x = Tensor::<T>::randn(spec.shape, &mut rng, 1.0)?;
    let flops = count_flops(&op, spec.shape)?.total();
    for _ in 0..spec.warmup {
        std::hint::black_box(op.forward(&x)?);
    }
    let (first, memory) = alloc::measure(|| op.forward(&x).map(drop));
    first?;
    let mut samples = Vec::with_capacity(spec.iters);
    for _ in 0..spec.iters {
        let t0 = Instant::now();
        let y = op.forward(std::hint::black_box(&x))?;
        samples.push(t0.elapsed().as_nanos() as u64);
        drop(std::hint::black_box(y));
    }
    Ok(ComplexityReport {
        name: kind.name().to_string(),
        shape: spec.shape,
        scale: spec.scale,
        param_count: count_params(&op),
        flop_count: flops,
        latency: Some(LatencyStats::from_samples(&samples)?),
        memory_delta_bytes: memory,
    })
}

/// Measures one operator inside a dedicated pool of `spec.threads` threads.
pub fn bench(kind: OpKind, spec: &BenchSpec) -> Result<ComplexityReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match spec.dtype {
        DType::F32 => bench_typed::<f32>(kind, spec),
        DType::F64 => bench_typed::<f64>(kind, spec),
    })
}

/// Parameter and FLOP counts only, without timing.
pub fn analyze(kind: OpKind, shape: Shape, scale: usize) -> Result<ComplexityReport> {
    let op = Upsampler::<f32>::build(kind, shape.c, scale, &mut Rng::new(0))?;
    Ok(ComplexityReport {
        name: kind.name().to_string(),
        shape,
        scale,
        param_count: count_params(&op),
        flop_count: count_flops(&op, shape)?.total(),
        latency: None,
        memory_delta_bytes: None,
    })
}
