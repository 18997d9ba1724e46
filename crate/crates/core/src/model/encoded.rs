use serde::{Deserialize, Serialize};

use super::{FrameSpanMap, Tier};
use crate::error::{Error, Result};

/// Code ids emitted for one tier, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsuStream {
    pub tier: Tier,
    pub codes: Vec<u32>,
}

impl DsuStream {
    pub fn new(tier: Tier, codes: Vec<u32>) -> Self {
        DsuStream { tier, codes }
    }

    /// `N_m`, the number of discrete units in the stream.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Four parallel code streams for one utterance plus the frame/segment bridge
/// needed to fuse them back to frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncodedRepr")]
pub struct EncodedUtterance {
    utterance_id: String,
    duration: f64,
    frame_hop: f64,
    streams: [DsuStream; 4],
    span_map: FrameSpanMap,
}

#[derive(Deserialize)]
struct EncodedRepr {
    utterance_id: String,
    duration: f64,
    frame_hop: f64,
    streams: [DsuStream; 4],
    span_map: FrameSpanMap,
}

impl TryFrom<EncodedRepr> for EncodedUtterance {
    type Error = Error;

    fn try_from(r: EncodedRepr) -> Result<Self> {
        EncodedUtterance::new(r.utterance_id, r.duration, r.frame_hop, r.streams, r.span_map)
    }
}

impl EncodedUtterance {
    pub fn new(
        utterance_id: String,
        duration: f64,
        frame_hop: f64,
        streams: [DsuStream; 4],
        span_map: FrameSpanMap,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::ZeroDuration);
        }
        if !(frame_hop.is_finite() && frame_hop > 0.0) {
            return Err(Error::invalid("encoded utterance", "frame hop must be positive"));
        }
        for (s, tier) in streams.iter().zip(Tier::ALL) {
            if s.tier != tier {
                return Err(Error::invalid(
                    "encoded utterance",
                    format!("slot for {tier} holds a {} stream", s.tier),
                ));
            }
            let expected = span_map.covered_count(tier);
            if s.len() != expected {
                return Err(Error::invalid(
                    "encoded utterance",
                    format!(
                        "{tier} stream has {} codes but the span map covers {expected} units",
                        s.len()
                    ),
                ));
            }
        }
        let frames = streams[0].len() as f64;
        if (frames * frame_hop - duration).abs() > frame_hop + 1e-9 {
            return Err(Error::invalid(
                "encoded utterance",
                format!("{frames} frames at hop {frame_hop} do not span {duration} s"),
            ));
        }
        Ok(EncodedUtterance {
            utterance_id,
            duration,
            frame_hop,
            streams,
            span_map,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    pub fn num_frames(&self) -> usize {
        self.streams[0].len()
    }

    pub fn stream(&self, tier: Tier) -> &DsuStream {
        &self.streams[tier.index()]
    }

    pub fn streams(&self) -> &[DsuStream; 4] {
        &self.streams
    }

    pub fn span_map(&self) -> &FrameSpanMap {
        &self.span_map
    }
}

/// Bits contributed by one stream: `units * log2(vocab_size)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamBits {
    pub tier: Tier,
    pub units: usize,
    pub vocab_size: usize,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateReport {
    pub utterance_id: String,
    pub streams: Vec<StreamBits>,
    pub total_bits: f64,
    pub duration: f64,
    pub bits_per_second: f64,
}

impl BitrateReport {
    /// Itemize and total the given streams over `duration` seconds.
    pub fn new(utterance_id: impl Into<String>, streams: Vec<StreamBits>, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::ZeroDuration);
        }
        let total_bits: f64 = streams.iter().map(|s| s.bits).sum();
        Ok(BitrateReport {
            utterance_id: utterance_id.into(),
            streams,
            total_bits,
            duration,
            bits_per_second: total_bits / duration,
        })
    }
}
