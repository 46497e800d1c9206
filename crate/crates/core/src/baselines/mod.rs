//! Reference upsamplers: fixed interpolation, learned deconvolution and
//! pixel shuffle, and kernel reassembly.

mod carafe;
mod interp;
mod learned;

pub use carafe::{reassemble, reassemble_backward, Carafe, CarafeConfig, CarafeGrads};
pub use interp::{bilinear_upsample, nearest_upsample};
pub use learned::{DeconvUpsampler, PixelShuffleUpsampler};
