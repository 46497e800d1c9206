//! Learnable point-sampling feature upsamplers.
//!
//! The crate implements the four DySample variants (static/dynamic offset
//! scope crossed with linear-then-shuffle / shuffle-then-linear offset
//! generation) on top of a small NCHW tensor type, together with the
//! baselines they are compared against (nearest, bilinear, transposed
//! convolution, pixel shuffle, kernel reassembly), exact backward passes
//! for every learnable operator, an analytic parameter/FLOP model, a
//! latency harness, NPY tensor I/O and an SVG offset visualizer.
//!
//! ```
//! use dysample::{make_variant, Rng, Shape, Tensor, Variant};
//!
//! let x = Tensor::<f64>::randn(Shape::new(1, 64, 8, 8)?, &mut Rng::new(0), 1.0)?;
//! let up = make_variant::<f64>(Variant::DySample, 64, 2)?;
//! assert_eq!(up.forward(&x)?.shape(), Shape::new(1, 64, 16, 16)?);
//! # Ok::<(), dysample::Error>(())
//! ```

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod dysample;
mod error;
pub mod io;
pub mod layers;
pub mod sampler;
pub mod tensor;
pub mod upsampler;
pub mod viz;

pub use crate::dysample::{
    build_sampling_set, make_variant, DySampleConfig, DySampleGrads, DySampleModule, OffsetField, OffsetStyle,
    ScopeMode, Variant,
};
pub use crate::error::{Error, Result};
pub use crate::sampler::{grid_sample, grid_sample_backward, make_base_grid, InitMode, SamplingGrid};
pub use crate::tensor::{DType, Element, Rng, Shape, Tensor};
pub use crate::upsampler::{OpKind, Upsampler};
