//! Door detection from a single grayscale image.
//!
//! The pipeline runs Canny edge detection, groups edge pixels into straight
//! line segments, pairs near-vertical segments into door candidates, measures
//! three door cues (post separation, concavity against the floor line and the
//! bottom-gap intensity profile) and classifies each candidate with a trained
//! Kohonen self-organizing map.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the corpus on
//! disk and the command line live in the `doorsom` crate.

#![no_std]

extern crate alloc;

pub mod canny;
pub mod doorfeat;
mod error;
pub mod image;
pub mod linefit;
pub mod pipeline;
pub mod som;
pub mod synth;

pub use error::{Error, Result};
pub use image::{GrayImage, RealImage, RgbImage};
