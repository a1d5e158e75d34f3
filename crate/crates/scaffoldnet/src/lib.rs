//! A self-contained deep-learning engine for classifying scanning-electron-microscope
//! images of fibrous scaffolds (airbrushed, electrospun, steel wire).
//!
//! Everything is built from first principles on a flat `f32` tensor type: an
//! im2col+GEMM convolution with hand-written backward passes, Adam, an image
//! pipeline (PGM/PNG ingestion, bilinear resize, per-sample standardization,
//! online augmentation, stratified splitting), multiclass ROC/AUC evaluation,
//! and a procedural fiber-image generator for producing labelled corpora.
//!
//! The numeric core is generic over `f32`/`f64` so gradient-check harnesses can
//! run the exact same code in 64-bit against central finite differences.

pub mod adam;
pub mod augment;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod image_io;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Pcg32;
pub use tensor::{Scalar, Tensor};
