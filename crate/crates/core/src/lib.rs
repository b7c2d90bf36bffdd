//! Segment images for labels the classifier was never trained on.
//!
//! A target label is mapped to proxy labels of a pretrained classifier (through WordNet or
//! word embeddings), the classifier's guided-backprop saliency for those proxies becomes
//! extra input channels of a small segmentation network, and GrabCut sharpens the
//! network's foreground likelihood into a mask.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod label_semantics;
pub mod nn;
pub mod pipeline;
pub mod postprocess;
pub mod raster;
pub mod saliency;
pub mod segnet;
pub mod weights;

pub use error::{Error, Result};
