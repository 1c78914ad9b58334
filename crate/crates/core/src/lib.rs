//! Core building blocks for axial video motion magnification: frames and
//! warps, SSIM, noise models, AXTF tensors, complex steerable pyramids,
//! classical magnifiers, synthetic data generation and evaluation.

pub mod axtf;
pub mod classical;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod fft;
pub mod filters;
pub mod frame;
pub mod magnify;
pub mod noise;
pub mod pyramid;
pub mod rng;
pub mod ssim;
pub mod temporal;

pub use error::{Error, Result};
pub use frame::{Boundary, Frame};
pub use magnify::{MagnificationSpec, Magnifier, MagnifierRegistry, MagnifyRequest, MethodConfig};
