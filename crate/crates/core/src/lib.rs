//! Region-based image classification and keyword retrieval.
//!
//! Images are preprocessed, segmented into significant regions with
//! mean-shift in HSV space, described by color moments and coarse Haar
//! wavelet coefficients, classified by a multi-level neural network, and
//! indexed by the set of categories their regions receive.

pub mod error;
pub mod features;
pub mod imaging;
pub mod manifest;
pub mod mlnn;
pub mod pipeline;
pub mod retrieval;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
