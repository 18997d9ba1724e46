//! Domain types shared across the toolkit.
//!
//! Every constructor validates its invariants, and deserialization goes through
//! the same constructors, so a value that exists is a valid value.

mod codebook;
mod encoded;
mod features;
mod matrix;
mod segments;
mod tier;

pub use codebook::{Codebook, Standardizer, SvcModel, TrainingMeta};
pub use encoded::{BitrateReport, DsuStream, EncodedUtterance, StreamBits};
pub use features::{FeatureMatrix, FusedFrameSequence};
pub use matrix::Matrix;
pub use segments::{FrameSpanMap, Segment, Segmentation, TIME_EPSILON};
pub use tier::Tier;

/// 50 frames per second.
pub const DEFAULT_FRAME_HOP: f64 = 0.020;

/// Hidden size of a large self-supervised speech encoder; only a default.
pub const DEFAULT_DIM: usize = 1024;
