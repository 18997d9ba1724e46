use serde::{Deserialize, Serialize};

use super::SilenceLabels;
use crate::error::{Error, Result};
use crate::model::{Segment, Segmentation, Tier, TIME_EPSILON};

#[derive(Serialize, Deserialize)]
struct JsonAlignment {
    duration: f64,
    phones: Vec<JsonSegment>,
    words: Vec<JsonSegment>,
}

#[derive(Serialize, Deserialize)]
struct JsonSegment {
    start: f64,
    end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// Parse the JSON alignment format with the default silence labels.
pub fn parse_json_alignment(bytes: &[u8]) -> Result<Segmentation> {
    parse_json_alignment_with(bytes, &SilenceLabels::default())
}

/// Serialize a segmentation in the format read by [`parse_json_alignment`].
pub fn write_json_alignment(seg: &Segmentation) -> String {
    let conv = |segs: &[Segment]| {
        segs.iter()
            .map(|s| JsonSegment {
                start: s.start(),
                end: s.end(),
                label: s.label().map(str::to_string),
            })
            .collect()
    };
    let doc = JsonAlignment {
        duration: seg.duration(),
        phones: conv(seg.phones()),
        words: conv(seg.words()),
    };
    serde_json::to_string_pretty(&doc).expect("alignment serializes")
}

pub fn parse_json_alignment_with(bytes: &[u8], silence: &SilenceLabels) -> Result<Segmentation> {
    let doc: JsonAlignment =
        serde_json::from_slice(bytes).map_err(|e| Error::MalformedJson(e.to_string()))?;
    if !(doc.duration.is_finite() && doc.duration > 0.0) {
        return Err(Error::SchemaViolation(format!(
            "duration must be positive, got {}",
            doc.duration
        )));
    }
    let phones = convert(Tier::Phone, doc.phones, doc.duration, silence)?;
    let words = convert(Tier::Word, doc.words, doc.duration, silence)?;
    Segmentation::new(doc.duration, phones, words).map_err(|e| Error::SchemaViolation(e.to_string()))
}

fn convert(
    tier: Tier,
    mut raw: Vec<JsonSegment>,
    duration: f64,
    silence: &SilenceLabels,
) -> Result<Vec<Segment>> {
    for s in &raw {
        if !(s.start.is_finite() && s.end.is_finite()) || s.end <= s.start || s.start < 0.0 {
            return Err(Error::SchemaViolation(format!(
                "{tier} segment [{}, {}] is empty, reversed or negative",
                s.start, s.end
            )));
        }
        if s.end > duration + TIME_EPSILON {
            return Err(Error::SchemaViolation(format!(
                "{tier} segment [{}, {}] extends past duration {duration}",
                s.start, s.end
            )));
        }
    }
    raw.sort_by(|a, b| a.start.total_cmp(&b.start));
    for pair in raw.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::SchemaViolation(format!(
                "overlapping {tier} segments [{}, {}] and [{}, {}]",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    raw.into_iter()
        .filter(|s| !s.label.as_deref().is_some_and(|l| silence.is_silence(l)))
        .map(|s| {
            Segment::new(tier, s.label, s.start, s.end).map_err(|e| Error::SchemaViolation(e.to_string()))
        })
        .collect()
}
