//! Praat TextGrid reader and writer.
//!
//! Both the long ("xmin = 0") and short (bare values) text layouts are read by the
//! same token-level parser: labels, `=`, `:` and bracketed indices are skipped, and
//! the remaining numbers, strings and `<exists>` flags appear in the same order in
//! either layout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SilenceLabels;
use crate::error::{Error, Result};
use crate::model::{Segment, Segmentation, Tier, TIME_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextGridDocument {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
    /// Non-fatal findings, e.g. skipped point tiers.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TextGridDocument {
    pub fn tier(&self, name: &str) -> Option<&IntervalTier> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Flag(bool),
}

struct Spanned {
    token: Token,
    line: usize,
}

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::MalformedTextGrid {
        line,
        message: message.into(),
    }
}

/// Decode bytes as UTF-8, dropping a leading byte-order mark.
fn decode(bytes: &[u8]) -> Result<&str> {
    if bytes.starts_with(&[0xFF, 0xFE]) || bytes.starts_with(&[0xFE, 0xFF]) {
        return Err(Error::UnsupportedEncoding("UTF-16 TextGrid; convert to UTF-8".into()));
    }
    let bytes = bytes.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| Error::UnsupportedEncoding(format!("invalid UTF-8: {e}")))
}

fn tokenize(text: &str) -> Result<(Vec<Spanned>, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '!' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '=' | ':' => i += 1,
            '[' => {
                let start_line = line;
                while i < chars.len() && chars[i] != ']' {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                if i == chars.len() {
                    return Err(malformed(start_line, "unclosed '['"));
                }
                i += 1;
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(malformed(start_line, "unterminated string")),
                        Some('"') if chars.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                tokens.push(Spanned {
                    token: Token::Str(s),
                    line: start_line,
                });
            }
            '<' => {
                let start = i;
                while i < chars.len() && chars[i] != '>' && chars[i] != '\n' {
                    i += 1;
                }
                if chars.get(i) != Some(&'>') {
                    return Err(malformed(line, "unclosed '<' flag"));
                }
                let flag: String = chars[start + 1..i].iter().collect();
                i += 1;
                let value = match flag.as_str() {
                    "exists" => true,
                    "absent" => false,
                    other => return Err(malformed(line, format!("unknown flag <{other}>"))),
                };
                tokens.push(Spanned {
                    token: Token::Flag(value),
                    line,
                });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit() || matches!(chars[i], '-' | '+' | '.' | 'e' | 'E'))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| malformed(line, format!("bad number {s:?}")))?;
                tokens.push(Spanned {
                    token: Token::Num(v),
                    line,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '?')) {
                    i += 1;
                }
            }
            other => return Err(malformed(line, format!("unexpected character {other:?}"))),
        }
    }
    // a trailing newline does not start a new line of content
    if text.ends_with('\n') && line > 1 {
        line -= 1;
    }
    Ok((tokens, line))
}

struct Cursor {
    tokens: Vec<Spanned>,
    pos: usize,
    last_line: usize,
}

impl Cursor {
    fn next(&mut self, what: &str) -> Result<&Spanned> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(malformed(
                self.last_line,
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn num(&mut self, what: &str) -> Result<(f64, usize)> {
        let t = self.next(what)?;
        match t.token {
            Token::Num(v) => Ok((v, t.line)),
            _ => Err(malformed(t.line, format!("expected number for {what}"))),
        }
    }

    fn string(&mut self, what: &str) -> Result<(String, usize)> {
        let t = self.next(what)?;
        match &t.token {
            Token::Str(s) => Ok((s.clone(), t.line)),
            _ => Err(malformed(t.line, format!("expected string for {what}"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let (v, line) = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
            return Err(malformed(line, format!("{what} must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }
}

/// Parse a TextGrid in long or short text form.
pub fn parse_textgrid(bytes: &[u8]) -> Result<TextGridDocument> {
    let text = decode(bytes)?;
    let (tokens, last_line) = tokenize(text)?;
    let mut cur = Cursor {
        tokens,
        pos: 0,
        last_line,
    };

    let (file_type, line) = cur.string("file type")?;
    if file_type != "ooTextFile" {
        return Err(malformed(line, format!("file type {file_type:?} is not \"ooTextFile\"")));
    }
    let (class, line) = cur.string("object class")?;
    if class != "TextGrid" {
        return Err(malformed(line, format!("object class {class:?} is not \"TextGrid\"")));
    }
    let (xmin, _) = cur.num("xmin")?;
    let (xmax, line) = cur.num("xmax")?;
    if xmax < xmin {
        return Err(malformed(line, "xmax precedes xmin"));
    }
    let has_tiers = {
        let t = cur.next("tiers flag")?;
        match t.token {
            Token::Flag(v) => v,
            _ => return Err(malformed(t.line, "expected <exists> or <absent>")),
        }
    };
    let size = if has_tiers { cur.count("tier count")? } else { 0 };

    let mut doc = TextGridDocument {
        xmin,
        xmax,
        tiers: Vec::with_capacity(size),
        warnings: Vec::new(),
    };
    for _ in 0..size {
        let (class, class_line) = cur.string("tier class")?;
        let (name, _) = cur.string("tier name")?;
        let (txmin, _) = cur.num("tier xmin")?;
        let (txmax, _) = cur.num("tier xmax")?;
        let n = cur.count("item count")?;
        match class.as_str() {
            "IntervalTier" => {
                let mut intervals = Vec::with_capacity(n);
                let mut prev_end = txmin;
                for _ in 0..n {
                    let (a, line) = cur.num("interval xmin")?;
                    let (b, _) = cur.num("interval xmax")?;
                    let (text, _) = cur.string("interval text")?;
                    if b < a {
                        return Err(malformed(line, format!("interval [{a}, {b}] ends before it starts")));
                    }
                    if (a - prev_end).abs() > TIME_EPSILON {
                        return Err(malformed(
                            line,
                            format!("interval at {a} is not contiguous with previous end {prev_end}"),
                        ));
                    }
                    if a < xmin - TIME_EPSILON || b > xmax + TIME_EPSILON {
                        return Err(malformed(line, format!("interval [{a}, {b}] outside document bounds")));
                    }
                    prev_end = b;
                    intervals.push(Interval { xmin: a, xmax: b, text });
                }
                doc.tiers.push(IntervalTier {
                    name,
                    xmin: txmin,
                    xmax: txmax,
                    intervals,
                });
            }
            "TextTier" => {
                for _ in 0..n {
                    cur.num("point time")?;
                    cur.string("point mark")?;
                }
                doc.warnings.push(format!("ignored point tier {name:?}"));
            }
            other => {
                return Err(malformed(class_line, format!("unknown tier class {other:?}")));
            }
        }
    }
    if let Some(extra) = cur.tokens.get(cur.pos) {
        return Err(malformed(extra.line, "trailing content after last tier"));
    }
    Ok(doc)
}

/// Extract phone and word tiers, dropping silence intervals.
pub fn textgrid_to_segmentation(
    doc: &TextGridDocument,
    phone_tier: &str,
    word_tier: &str,
    silence: &SilenceLabels,
) -> Result<Segmentation> {
    let phones = doc
        .tier(phone_tier)
        .ok_or_else(|| Error::MissingTier(phone_tier.to_string()))?;
    let words = doc
        .tier(word_tier)
        .ok_or_else(|| Error::MissingTier(word_tier.to_string()))?;
    let convert = |tier: Tier, src: &IntervalTier| -> Result<Vec<Segment>> {
        src.intervals
            .iter()
            // zero-length intervals cannot hold a frame centre
            .filter(|iv| !silence.is_silence(&iv.text) && iv.xmax > iv.xmin)
            .map(|iv| Segment::new(tier, Some(iv.text.clone()), iv.xmin.max(0.0), iv.xmax))
            .collect()
    };
    Segmentation::new(doc.xmax, convert(Tier::Phone, phones)?, convert(Tier::Word, words)?)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Interval tiers for a segmentation, with unlabelled gap intervals so that each
/// tier spans `[0, duration]` contiguously.
pub fn segmentation_to_textgrid(seg: &Segmentation, phone_tier: &str, word_tier: &str) -> TextGridDocument {
    let xmax = seg.duration();
    let tier = |name: &str, segs: &[Segment]| {
        let mut intervals = Vec::with_capacity(2 * segs.len() + 1);
        let mut t = 0.0;
        for s in segs {
            if s.start() > t {
                intervals.push(Interval { xmin: t, xmax: s.start(), text: String::new() });
            }
            intervals.push(Interval {
                xmin: s.start(),
                xmax: s.end(),
                text: s.label().unwrap_or_default().to_string(),
            });
            t = s.end();
        }
        if t < xmax {
            intervals.push(Interval { xmin: t, xmax, text: String::new() });
        }
        IntervalTier { name: name.to_string(), xmin: 0.0, xmax: xmax.max(t), intervals }
    };
    TextGridDocument {
        xmin: 0.0,
        xmax,
        tiers: vec![tier(word_tier, seg.words()), tier(phone_tier, seg.phones())],
        warnings: Vec::new(),
    }
}

/// Serialize in Praat's long text form.
pub fn write_textgrid_long(doc: &TextGridDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(out, "xmin = {}\nxmax = {}", doc.xmin, doc.xmax);
    if doc.tiers.is_empty() {
        let _ = writeln!(out, "tiers? <absent>");
        return out;
    }
    let _ = writeln!(out, "tiers? <exists>\nsize = {}\nitem []:", doc.tiers.len());
    for (i, tier) in doc.tiers.iter().enumerate() {
        let _ = writeln!(out, "    item [{}]:", i + 1);
        let _ = writeln!(out, "        class = \"IntervalTier\"");
        let _ = writeln!(out, "        name = {}", quote(&tier.name));
        let _ = writeln!(out, "        xmin = {}\n        xmax = {}", tier.xmin, tier.xmax);
        let _ = writeln!(out, "        intervals: size = {}", tier.intervals.len());
        for (j, iv) in tier.intervals.iter().enumerate() {
            let _ = writeln!(out, "        intervals [{}]:", j + 1);
            let _ = writeln!(out, "            xmin = {}\n            xmax = {}", iv.xmin, iv.xmax);
            let _ = writeln!(out, "            text = {}", quote(&iv.text));
        }
    }
    out
}

/// Serialize in Praat's short text form.
pub fn write_textgrid_short(doc: &TextGridDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(out, "{}\n{}", doc.xmin, doc.xmax);
    if doc.tiers.is_empty() {
        let _ = writeln!(out, "<absent>");
        return out;
    }
    let _ = writeln!(out, "<exists>\n{}", doc.tiers.len());
    for tier in &doc.tiers {
        let _ = writeln!(out, "\"IntervalTier\"\n{}\n{}\n{}\n{}", quote(&tier.name), tier.xmin, tier.xmax, tier.intervals.len());
        for iv in &tier.intervals {
            let _ = writeln!(out, "{}\n{}\n{}", iv.xmin, iv.xmax, quote(&iv.text));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.5
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 0.5
        intervals: size = 1
        intervals [1]:
            xmin = 0.0
            xmax = 0.5
            text = "AH"
"#;

    #[test]
    fn minimal_long_form() {
        let doc = parse_textgrid(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.xmax, 0.5);
        assert_eq!(doc.tiers.len(), 1);
        assert_eq!(doc.tiers[0].name, "phones");
        assert_eq!(
            doc.tiers[0].intervals,
            vec![Interval {
                xmin: 0.0,
                xmax: 0.5,
                text: "AH".into()
            }]
        );
        assert!(doc.warnings.is_empty());
    }

    #[test]
    fn bom_and_quotes() {
        let mut bytes = vec![0xEF, 0xBB, 0xBF];
        bytes.extend_from_slice(MINIMAL.replace("\"AH\"", "\"say \"\"hi\"\"\"").as_bytes());
        let doc = parse_textgrid(&bytes).unwrap();
        assert_eq!(doc.tiers[0].intervals[0].text, "say \"hi\"");
    }

    #[test]
    fn truncated_reports_line() {
        let cut = MINIMAL.split("xmax = 0.5\n            text").next().unwrap();
        let cut = format!("{cut}xmax = 0.5\n");
        let lines = cut.lines().count();
        match parse_textgrid(cut.as_bytes()) {
            Err(Error::MalformedTextGrid { line, .. }) => assert_eq!(line, lines),
            other => panic!("expected MalformedTextGrid, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line() {
        let bad = MINIMAL.replace("xmin = 0.0", "xmin = 0.0.1");
        match parse_textgrid(bad.as_bytes()) {
            Err(Error::MalformedTextGrid { line, .. }) => assert_eq!(line, 16),
            other => panic!("expected MalformedTextGrid, got {other:?}"),
        }
        let bad = MINIMAL.replace("\"AH\"\n", "\"AH\n");
        assert!(matches!(parse_textgrid(bad.as_bytes()), Err(Error::MalformedTextGrid { .. })));
    }

    #[test]
    fn encoding_errors() {
        assert!(matches!(parse_textgrid(&[0xFF, 0xFE, 0x46, 0x00]), Err(Error::UnsupportedEncoding(_))));
        assert!(matches!(parse_textgrid(&[0x46, 0xC3, 0x28]), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn point_tiers_are_skipped_with_warning() {
        let src = r#"File type = "ooTextFile"
Object class = "TextGrid"
0
1
<exists>
2
"TextTier"
"tones"
0
1
2
0.2
"H*"
0.7
"L%"
"IntervalTier"
"words"
0
1
1
0
1
"yes"
"#;
        let doc = parse_textgrid(src.as_bytes()).unwrap();
        assert_eq!(doc.tiers.len(), 1);
        assert_eq!(doc.tiers[0].name, "words");
        assert_eq!(doc.warnings.len(), 1);
    }

    #[test]
    fn non_contiguous_intervals_rejected() {
        let src = MINIMAL.replace("xmin = 0.0\n", "xmin = 0.1\n");
        assert!(matches!(parse_textgrid(src.as_bytes()), Err(Error::MalformedTextGrid { line: 16, .. })));
    }

    fn doc(words: &[(f64, f64, &str)], phones: &[(f64, f64, &str)], xmax: f64) -> TextGridDocument {
        let tier = |name: &str, ivs: &[(f64, f64, &str)]| IntervalTier {
            name: name.into(),
            xmin: 0.0,
            xmax,
            intervals: ivs
                .iter()
                .map(|&(a, b, t)| Interval {
                    xmin: a,
                    xmax: b,
                    text: t.into(),
                })
                .collect(),
        };
        TextGridDocument {
            xmin: 0.0,
            xmax,
            tiers: vec![tier("words", words), tier("phones", phones)],
            warnings: vec![],
        }
    }

    #[test]
    fn silence_is_excluded() {
        let d = doc(&[(0.0, 0.5, "ah")], &[(0.0, 0.2, "sil"), (0.2, 0.5, "AH")], 0.5);
        let seg = textgrid_to_segmentation(&d, "phones", "words", &SilenceLabels::default()).unwrap();
        assert_eq!(seg.phones().len(), 1);
        assert_eq!(seg.phones()[0].start(), 0.2);
        assert_eq!(seg.phones()[0].end(), 0.5);
        assert_eq!(seg.phones()[0].label(), Some("AH"));
    }

    #[test]
    fn word_and_phone_counts() {
        let d = doc(&[(0.0, 1.0, "hello")], &[(0.0, 0.4, "HH"), (0.4, 1.0, "AH")], 1.0);
        let seg = textgrid_to_segmentation(&d, "phones", "words", &SilenceLabels::default()).unwrap();
        assert_eq!(seg.words().len(), 1);
        assert_eq!(seg.phones().len(), 2);
        let utt = &seg.segments(Tier::Utterance)[0];
        assert_eq!((utt.start(), utt.end()), (0.0, 1.0));
    }

    #[test]
    fn missing_tier() {
        let d = doc(&[(0.0, 1.0, "a")], &[(0.0, 1.0, "AH")], 1.0);
        match textgrid_to_segmentation(&d, "phonemes", "words", &SilenceLabels::default()) {
            Err(Error::MissingTier(name)) => assert_eq!(name, "phonemes"),
            other => panic!("expected MissingTier, got {other:?}"),
        }
    }

    #[test]
    fn writers_round_trip() {
        let d = doc(&[(0.0, 0.3, ""), (0.3, 1.25, "it's \"x\"")], &[(0.0, 0.3, "sil"), (0.3, 1.25, "IH1")], 1.25);
        assert_eq!(parse_textgrid(write_textgrid_long(&d).as_bytes()).unwrap(), d);
        assert_eq!(parse_textgrid(write_textgrid_short(&d).as_bytes()).unwrap(), d);
    }

    #[test]
    fn segmentation_writer_round_trip() {
        let seg = Segmentation::new(
            2.0,
            vec![
                Segment::new(Tier::Phone, Some("p1".into()), 0.25, 0.5).unwrap(),
                Segment::new(Tier::Phone, Some("p2".into()), 0.5, 1.1).unwrap(),
            ],
            vec![Segment::new(Tier::Word, Some("w".into()), 0.25, 1.1).unwrap()],
        )
        .unwrap();
        let doc = segmentation_to_textgrid(&seg, "phones", "words");
        for text in [write_textgrid_long(&doc), write_textgrid_short(&doc)] {
            let back = parse_textgrid(text.as_bytes()).unwrap();
            let got = textgrid_to_segmentation(&back, "phones", "words", &SilenceLabels::default()).unwrap();
            assert_eq!(got, seg);
        }
    }
}

