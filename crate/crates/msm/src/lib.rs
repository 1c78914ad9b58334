//! Learned axial motion magnification on a small CPU differentiation engine.

pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod params;
pub mod real;
pub mod tape;
pub mod train;
pub mod video;

pub use loss::{LossConfig, LossTerms};
pub use model::{AlphaMaps, Model, ModelConfig};
pub use train::{train, CompactSample, TrainConfig, TrainOutput, TrainReport};
pub use video::{magnify_video_msm, register, MsmMagnifier};
