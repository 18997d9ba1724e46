use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::Tier;
use crate::error::{Error, Result};

/// Slack, in seconds, allowed when checking that segments fit inside the utterance.
/// Alignment files round times to a few decimals.
pub const TIME_EPSILON: f64 = 1e-6;

/// A labelled time interval `[start, end)` on one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentRepr")]
pub struct Segment {
    tier: Tier,
    label: Option<String>,
    start: f64,
    end: f64,
}

#[derive(Deserialize)]
struct SegmentRepr {
    tier: Tier,
    #[serde(default)]
    label: Option<String>,
    start: f64,
    end: f64,
}

impl TryFrom<SegmentRepr> for Segment {
    type Error = Error;

    fn try_from(r: SegmentRepr) -> Result<Self> {
        Segment::new(r.tier, r.label, r.start, r.end)
    }
}

impl Segment {
    pub fn new(tier: Tier, label: Option<String>, start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::invalid("segment", "times must be finite"));
        }
        if start < 0.0 {
            return Err(Error::invalid("segment", format!("start {start} is negative")));
        }
        if end <= start {
            return Err(Error::invalid(
                "segment",
                format!("end {end} must be after start {start}"),
            ));
        }
        Ok(Segment {
            tier,
            label,
            start,
            end,
        })
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Half-open membership test.
    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Phone and word intervals for one utterance. The utterance tier is a single
/// implicit segment `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentationRepr")]
pub struct Segmentation {
    duration: f64,
    phones: Vec<Segment>,
    words: Vec<Segment>,
    #[serde(skip_serializing)]
    utterance: [Segment; 1],
}

#[derive(Deserialize)]
struct SegmentationRepr {
    duration: f64,
    phones: Vec<Segment>,
    words: Vec<Segment>,
}

impl TryFrom<SegmentationRepr> for Segmentation {
    type Error = Error;

    fn try_from(r: SegmentationRepr) -> Result<Self> {
        Segmentation::new(r.duration, r.phones, r.words)
    }
}

impl Segmentation {
    pub fn new(duration: f64, phones: Vec<Segment>, words: Vec<Segment>) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::ZeroDuration);
        }
        check_tier(Tier::Phone, &phones, duration)?;
        check_tier(Tier::Word, &words, duration)?;
        let utterance = [Segment::new(Tier::Utterance, None, 0.0, duration)?];
        Ok(Segmentation {
            duration,
            phones,
            words,
            utterance,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Segments of a tier. The frame tier has no explicit segments.
    pub fn segments(&self, tier: Tier) -> &[Segment] {
        match tier {
            Tier::Frame => &[],
            Tier::Phone => &self.phones,
            Tier::Word => &self.words,
            Tier::Utterance => &self.utterance,
        }
    }

    pub fn phones(&self) -> &[Segment] {
        &self.phones
    }

    pub fn words(&self) -> &[Segment] {
        &self.words
    }
}

fn check_tier(tier: Tier, segs: &[Segment], duration: f64) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for (i, s) in segs.iter().enumerate() {
        if s.tier != tier {
            return Err(Error::invalid(
                "segmentation",
                format!("{} segment {i} is tagged {}", tier, s.tier),
            ));
        }
        if s.start < prev_end {
            return Err(Error::invalid(
                "segmentation",
                format!("{tier} segment {i} starts at {} before previous end {prev_end}", s.start),
            ));
        }
        if s.end > duration + TIME_EPSILON {
            return Err(Error::invalid(
                "segmentation",
                format!("{tier} segment {i} ends at {} past duration {duration}", s.end),
            ));
        }
        prev_end = s.end;
    }
    Ok(())
}

/// Per-frame segment membership for the pooled tiers.
///
/// Entry `n` of a tier is the index (into [`Segmentation::segments`]) of the segment
/// whose interval contains the centre of frame `n`, or `None` if no segment does.
/// The utterance tier always maps every frame to segment 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpanMapRepr")]
pub struct FrameSpanMap {
    num_frames: usize,
    phone: Vec<Option<u32>>,
    word: Vec<Option<u32>>,
    /// Segment counts of the phone and word tiers, covered or not.
    segment_counts: [usize; 2],
}

#[derive(Deserialize)]
struct SpanMapRepr {
    num_frames: usize,
    phone: Vec<Option<u32>>,
    word: Vec<Option<u32>>,
    segment_counts: [usize; 2],
}

impl TryFrom<SpanMapRepr> for FrameSpanMap {
    type Error = Error;

    fn try_from(r: SpanMapRepr) -> Result<Self> {
        FrameSpanMap::new(r.num_frames, r.phone, r.word, r.segment_counts)
    }
}

impl FrameSpanMap {
    pub fn new(
        num_frames: usize,
        phone: Vec<Option<u32>>,
        word: Vec<Option<u32>>,
        segment_counts: [usize; 2],
    ) -> Result<Self> {
        if num_frames == 0 {
            return Err(Error::invalid("frame span map", "needs at least one frame"));
        }
        for (tier, spans, count) in [
            (Tier::Phone, &phone, segment_counts[0]),
            (Tier::Word, &word, segment_counts[1]),
        ] {
            if spans.len() != num_frames {
                return Err(Error::DimensionMismatch {
                    context: "frame span map",
                    expected: num_frames,
                    found: spans.len(),
                });
            }
            let mut last: Option<u32> = None;
            let mut closed = false;
            for s in spans.iter() {
                match (*s, last) {
                    (Some(idx), _) if idx as usize >= count => {
                        return Err(Error::invalid(
                            "frame span map",
                            format!("{tier} index {idx} out of range ({count} segments)"),
                        ))
                    }
                    (Some(idx), Some(prev)) if idx < prev || (idx == prev && closed) => {
                        return Err(Error::invalid(
                            "frame span map",
                            format!("{tier} segments are not monotone and contiguous"),
                        ))
                    }
                    (Some(idx), _) => {
                        last = Some(idx);
                        closed = false;
                    }
                    (None, _) => closed = true,
                }
            }
        }
        Ok(FrameSpanMap {
            num_frames,
            phone,
            word,
            segment_counts,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Segment covering frame `n` at `tier`. The frame tier maps each frame to itself.
    #[inline]
    pub fn segment_of(&self, tier: Tier, n: usize) -> Option<usize> {
        match tier {
            Tier::Frame => Some(n),
            Tier::Phone => self.phone[n].map(|i| i as usize),
            Tier::Word => self.word[n].map(|i| i as usize),
            Tier::Utterance => Some(0),
        }
    }

    /// Number of segments at `tier` in the source segmentation, including ones that
    /// cover no frame.
    pub fn segment_count(&self, tier: Tier) -> usize {
        match tier {
            Tier::Frame => self.num_frames,
            Tier::Phone => self.segment_counts[0],
            Tier::Word => self.segment_counts[1],
            Tier::Utterance => 1,
        }
    }

    /// Covered segments in time order, each with its contiguous frame range.
    pub fn covered_runs(&self, tier: Tier) -> Vec<(usize, Range<usize>)> {
        let mut runs: Vec<(usize, Range<usize>)> = Vec::new();
        for n in 0..self.num_frames {
            let Some(seg) = self.segment_of(tier, n) else {
                continue;
            };
            match runs.last_mut() {
                Some((s, r)) if *s == seg => r.end = n + 1,
                _ => runs.push((seg, n..n + 1)),
            }
        }
        runs
    }

    /// Number of distinct segments that cover at least one frame.
    pub fn covered_count(&self, tier: Tier) -> usize {
        match tier {
            Tier::Frame => self.num_frames,
            Tier::Utterance => 1,
            _ => self.covered_runs(tier).len(),
        }
    }

    /// For each frame, the position of its covering segment among the covered
    /// segments of `tier` (i.e. its index into that tier's code stream).
    pub fn stream_positions(&self, tier: Tier) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_frames];
        for (pos, (_, range)) in self.covered_runs(tier).into_iter().enumerate() {
            for slot in &mut out[range] {
                *slot = Some(pos);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(tier: Tier, s: f64, e: f64) -> Segment {
        Segment::new(tier, None, s, e).unwrap()
    }

    #[test]
    fn segment_invariants() {
        assert!(Segment::new(Tier::Phone, None, 0.5, 0.5).is_err());
        assert!(Segment::new(Tier::Phone, None, 0.6, 0.5).is_err());
        assert!(Segment::new(Tier::Phone, None, -0.1, 0.5).is_err());
        assert!(Segment::new(Tier::Phone, None, 0.0, f64::NAN).is_err());
        let s = seg(Tier::Phone, 0.2, 0.4);
        assert!(s.contains(0.2) && !s.contains(0.4));
    }

    #[test]
    fn segmentation_invariants() {
        let ok = Segmentation::new(1.0, vec![seg(Tier::Phone, 0.0, 0.5), seg(Tier::Phone, 0.5, 1.0)], vec![]);
        assert!(ok.is_ok());
        let overlap =
            Segmentation::new(1.0, vec![seg(Tier::Phone, 0.0, 0.6), seg(Tier::Phone, 0.5, 1.0)], vec![]);
        assert!(overlap.is_err());
        let unsorted =
            Segmentation::new(1.0, vec![seg(Tier::Phone, 0.5, 1.0), seg(Tier::Phone, 0.0, 0.5)], vec![]);
        assert!(unsorted.is_err());
        let past = Segmentation::new(1.0, vec![], vec![seg(Tier::Word, 0.5, 1.5)]);
        assert!(past.is_err());
        let wrong_tier = Segmentation::new(1.0, vec![seg(Tier::Word, 0.0, 1.0)], vec![]);
        assert!(wrong_tier.is_err());
        assert!(matches!(Segmentation::new(0.0, vec![], vec![]), Err(Error::ZeroDuration)));

        let s = ok.unwrap();
        assert_eq!(s.segments(Tier::Utterance).len(), 1);
        assert_eq!(s.segments(Tier::Utterance)[0].end(), 1.0);
        assert!(s.segments(Tier::Frame).is_empty());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Segmentation>(&json).unwrap(), s);
    }

    #[test]
    fn span_map_validation() {
        assert!(FrameSpanMap::new(3, vec![Some(0), None, Some(0)], vec![None; 3], [1, 0]).is_err());
        assert!(FrameSpanMap::new(3, vec![Some(1), Some(0), None], vec![None; 3], [2, 0]).is_err());
        assert!(FrameSpanMap::new(3, vec![Some(2), None, None], vec![None; 3], [2, 0]).is_err());
        assert!(FrameSpanMap::new(2, vec![None; 3], vec![None; 2], [0, 0]).is_err());
        let m = FrameSpanMap::new(4, vec![None, Some(1), Some(1), Some(3)], vec![Some(0); 4], [4, 1]).unwrap();
        assert_eq!(m.covered_runs(Tier::Phone), vec![(1, 1..3), (3, 3..4)]);
        assert_eq!(m.covered_count(Tier::Phone), 2);
        assert_eq!(m.stream_positions(Tier::Phone), vec![None, Some(0), Some(0), Some(1)]);
        assert_eq!(m.segment_of(Tier::Utterance, 3), Some(0));
        assert_eq!(m.segment_count(Tier::Phone), 4);
    }
}
