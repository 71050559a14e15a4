//! Lightweight image encoders for promptable segmentation.
//!
//! A group-mix attention (GMA) student encoder is distilled from a frozen
//! ViT-style teacher by matching output feature maps under a Huber loss.
//! Around that core sit a small reverse-mode autodiff engine, analytic
//! parameter/FLOP accounting, a prompt-conditioned mask decoder with an
//! mIoU harness, and the file formats that tie the pipeline together.

pub mod cli;
pub mod distill;
pub mod encoders;
pub mod error;
pub mod io;
pub mod numerics;
pub mod profile;
pub mod segment;

mod parallel;

pub use error::{Error, Result};
