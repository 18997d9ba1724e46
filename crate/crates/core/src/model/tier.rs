use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Segmentation granularity. Ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Frame,
    Phone,
    Word,
    Utterance,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Frame, Tier::Phone, Tier::Word, Tier::Utterance];

    /// Tiers whose units are pooled segments rather than raw frames.
    pub const POOLED: [Tier; 3] = [Tier::Phone, Tier::Word, Tier::Utterance];

    /// Position in [`Tier::ALL`]; also the on-disk tag.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Tier> {
        Tier::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Frame => "frame",
            Tier::Phone => "phone",
            Tier::Word => "word",
            Tier::Utterance => "utterance",
        }
    }

    /// Offset added to the master seed when training this tier's codebook.
    pub fn seed_offset(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frame" | "frames" => Ok(Tier::Frame),
            "phone" | "phones" => Ok(Tier::Phone),
            "word" | "words" => Ok(Tier::Word),
            "utterance" | "utt" => Ok(Tier::Utterance),
            _ => Err(Error::Config(format!("unknown tier {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_tags() {
        assert!(Tier::Frame < Tier::Phone && Tier::Phone < Tier::Word && Tier::Word < Tier::Utterance);
        for t in Tier::ALL {
            assert_eq!(Tier::from_tag(t.tag()), Some(t));
            assert_eq!(t.name().parse::<Tier>().unwrap(), t);
        }
        assert_eq!(Tier::from_tag(4), None);
        assert_eq!(serde_json::to_string(&Tier::Word).unwrap(), "\"word\"");
    }
}
