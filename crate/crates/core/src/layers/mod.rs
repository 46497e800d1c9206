//! Learnable building blocks with hand-written backward passes.

mod activation;
mod conv;
mod linear;
mod optim;

pub use activation::{sigmoid, sigmoid_backward, softmax_channels, softmax_channels_backward};
pub use conv::{Conv2dLayer, ConvGrads, Deconv2dLayer};
pub use linear::{LinearGrads, LinearLayer};
pub use optim::sgd_step;
