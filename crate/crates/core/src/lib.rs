//! Music-driven singing-face parameter generation.
//!
//! Pipeline: separated voice/music WAV stems → MFCC feature windows →
//! two-stream convolutional audio encoder → per-task attention modulators →
//! expression / head-pose / eye-state decoders, trained with a regression +
//! adversarial loss stack and evaluated with correlation, roughness, and
//! blink-statistics metrics.

pub mod error;
pub mod scalar;
pub mod tensor;

pub mod audio;
pub mod loss;
pub mod model;
pub mod nn;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::Tensor;

/// Concrete aliases for the two supported precisions.
pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
