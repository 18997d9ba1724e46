//! Segmentation-variant codebooks for self-supervised speech features.
//!
//! Frame-level features are pooled over phone, word and utterance segments from a
//! forced alignment, each tier gets its own KMeans++ codebook, and an utterance is
//! encoded as four parallel discrete-unit streams. Decoding fuses the streams back
//! into one vector per frame by averaging the selected centroids.

pub mod alignment;
pub mod codec;
pub mod error;
pub mod format;
pub mod model;
pub mod pipeline;
pub mod pooling;
pub mod probe;
pub mod quantizer;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    BitrateReport, Codebook, DsuStream, EncodedUtterance, FeatureMatrix, FrameSpanMap,
    FusedFrameSequence, Matrix, Segment, Segmentation, Standardizer, StreamBits, SvcModel, Tier,
    TrainingMeta,
};
pub use scalar::Scalar;

pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type Codebook32 = Codebook<f32>;
pub type Codebook64 = Codebook<f64>;
pub type SvcModel32 = SvcModel<f32>;
pub type SvcModel64 = SvcModel<f64>;
pub type FusedFrameSequence32 = FusedFrameSequence<f32>;
pub type FusedFrameSequence64 = FusedFrameSequence<f64>;
