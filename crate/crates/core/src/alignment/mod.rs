//! Forced-alignment ingestion and the time-to-frame bridge.

mod json;
mod textgrid;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use json::{parse_json_alignment, parse_json_alignment_with, write_json_alignment};
pub use textgrid::{
    parse_textgrid, segmentation_to_textgrid, textgrid_to_segmentation, write_textgrid_long, write_textgrid_short, Interval,
    IntervalTier, TextGridDocument,
};

use crate::error::{Error, Result};
use crate::model::{FrameSpanMap, Segment, Segmentation, Tier};

/// Labels treated as non-speech and dropped from the phone and word tiers.
/// Matching ignores surrounding whitespace and ASCII case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilenceLabels(BTreeSet<String>);

impl Default for SilenceLabels {
    fn default() -> Self {
        SilenceLabels::new(["", "sil", "sp", "spn"])
    }
}

impl SilenceLabels {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(labels: I) -> Self {
        SilenceLabels(
            labels
                .into_iter()
                .map(|l| l.as_ref().trim().to_ascii_lowercase())
                .collect(),
        )
    }

    /// Keep every interval, including silence.
    pub fn none() -> Self {
        SilenceLabels(BTreeSet::new())
    }

    pub fn is_silence(&self, label: &str) -> bool {
        self.0.contains(&label.trim().to_ascii_lowercase())
    }
}

/// How to read alignment files referenced from a corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOptions {
    pub phone_tier: String,
    pub word_tier: String,
    pub silence: SilenceLabels,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        AlignmentOptions {
            phone_tier: "phones".into(),
            word_tier: "words".into(),
            silence: SilenceLabels::default(),
        }
    }
}

/// Load a `.TextGrid` or `.json` alignment, chosen by file extension.
pub fn load_alignment(path: &Path, opts: &AlignmentOptions) -> Result<Segmentation> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    match ext.as_str() {
        "json" => parse_json_alignment_with(&bytes, &opts.silence),
        "textgrid" => {
            let doc = parse_textgrid(&bytes)?;
            textgrid_to_segmentation(&doc, &opts.phone_tier, &opts.word_tier, &opts.silence)
        }
        _ => Err(Error::Config(format!(
            "{}: alignment must be .TextGrid or .json",
            path.display()
        ))),
    }
}

/// Assign each frame to the segment containing its centre `(n + 0.5) * frame_hop`.
pub fn build_frame_span_map(seg: &Segmentation, frame_hop: f64, num_frames: usize) -> FrameSpanMap {
    assert!(num_frames >= 1, "num_frames must be at least 1");
    assert!(frame_hop > 0.0, "frame_hop must be positive");
    let map_tier = |segs: &[Segment]| -> Vec<Option<u32>> {
        let mut out = Vec::with_capacity(num_frames);
        let mut p = 0;
        for n in 0..num_frames {
            let centre = (n as f64 + 0.5) * frame_hop;
            while p < segs.len() && segs[p].end() <= centre {
                p += 1;
            }
            out.push((p < segs.len() && segs[p].contains(centre)).then_some(p as u32));
        }
        out
    };
    FrameSpanMap::new(
        num_frames,
        map_tier(seg.segments(Tier::Phone)),
        map_tier(seg.segments(Tier::Word)),
        [seg.phones().len(), seg.words().len()],
    )
    .expect("frame-centre assignment is monotone by construction")
}

/// Reject feature/alignment pairs whose lengths disagree by more than one frame.
pub fn check_frame_count(seg: &Segmentation, frame_hop: f64, num_frames: usize) -> Result<()> {
    let expected = seg.duration() / frame_hop;
    if (num_frames as f64 - expected).abs() > 1.0 + 1e-9 {
        return Err(Error::AlignmentLengthMismatch {
            num_frames,
            expected_frames: expected,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phones(d: f64, ivs: &[(f64, f64)]) -> Segmentation {
        let p = ivs
            .iter()
            .map(|&(a, b)| Segment::new(Tier::Phone, None, a, b).unwrap())
            .collect();
        Segmentation::new(d, p, vec![]).unwrap()
    }

    #[test]
    fn full_cover() {
        let m = build_frame_span_map(&phones(1.0, &[(0.0, 1.0)]), 0.02, 50);
        assert!((0..50).all(|n| m.segment_of(Tier::Phone, n) == Some(0)));
        assert!((0..50).all(|n| m.segment_of(Tier::Utterance, n) == Some(0)));
    }

    #[test]
    fn boundary_by_frame_centre() {
        let m = build_frame_span_map(&phones(0.4, &[(0.0, 0.2), (0.2, 0.4)]), 0.02, 20);
        for n in 0..10 {
            assert_eq!(m.segment_of(Tier::Phone, n), Some(0), "frame {n}");
        }
        for n in 10..20 {
            assert_eq!(m.segment_of(Tier::Phone, n), Some(1), "frame {n}");
        }
    }

    #[test]
    fn leading_gap_is_uncovered() {
        let m = build_frame_span_map(&phones(1.0, &[(0.5, 1.0)]), 0.02, 50);
        for n in 0..25 {
            assert_eq!(m.segment_of(Tier::Phone, n), None, "frame {n}");
        }
        for n in 25..50 {
            assert_eq!(m.segment_of(Tier::Phone, n), Some(0), "frame {n}");
        }
        // no words at all
        assert!((0..50).all(|n| m.segment_of(Tier::Word, n).is_none()));
    }

    #[test]
    fn short_segment_between_centres_covers_nothing() {
        let m = build_frame_span_map(&phones(0.1, &[(0.0, 0.012), (0.012, 0.018), (0.018, 0.1)]), 0.02, 5);
        assert_eq!(m.covered_count(Tier::Phone), 2);
        assert_eq!(m.segment_of(Tier::Phone, 0), Some(0));
        assert_eq!(m.segment_of(Tier::Phone, 1), Some(2));
        assert_eq!(m.segment_count(Tier::Phone), 3);
    }

    #[test]
    fn frame_count_check() {
        let s = phones(1.0, &[(0.0, 1.0)]);
        assert!(check_frame_count(&s, 0.02, 50).is_ok());
        assert!(check_frame_count(&s, 0.02, 49).is_ok());
        assert!(check_frame_count(&s, 0.02, 51).is_ok());
        assert!(matches!(check_frame_count(&s, 0.02, 52), Err(Error::AlignmentLengthMismatch { .. })));
    }

    #[test]
    fn silence_matching() {
        let s = SilenceLabels::default();
        assert!(s.is_silence(""));
        assert!(s.is_silence(" SIL "));
        assert!(!s.is_silence("AH"));
        assert!(!SilenceLabels::none().is_silence(""));
    }
}
