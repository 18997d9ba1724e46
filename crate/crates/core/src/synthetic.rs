//! Synthetic corpora with a known structure, for tests, demos and benchmarks.
//!
//! Every phone draws a content cluster from the corners of a cube
//! `{-scale, +scale}^content_dims`; its frames are that corner plus isotropic
//! Gaussian noise. Two label signals ride on top as constant offsets:
//!
//! * an utterance class adds `emotion_offset` to dimension `content_dims + class`
//!   of every frame in the utterance;
//! * a binary word label adds `+prominence_offset` or `-prominence_offset` to the
//!   last dimension of every frame in the word.
//!
//! With the default settings the offsets are small next to the frame noise, so a
//! frame codebook sized to the content clusters discards them while segment means
//! keep them.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::alignment::{segmentation_to_textgrid, write_json_alignment, write_textgrid_long, write_textgrid_short};
use crate::codec::{CorpusManifest, ManifestEntry, Split, Utterance};
use crate::error::{Error, Result};
use crate::format::write_fmat;
use crate::model::{FeatureMatrix, Segment, Segmentation, Tier};
use crate::scalar::Scalar;

pub const EMOTIONS: [&str; 4] = ["neutral", "happy", "sad", "angry"];

/// Manifest label keys written by [`write_corpus`].
pub const EMOTION_KEY: &str = "emotion";
pub const PROMINENCE_KEY: &str = "prominence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Utterances in the train, valid and test splits.
    pub utterances: [usize; 3],
    pub frame_hop: f64,
    pub content_dims: usize,
    pub content_scale: f64,
    pub frame_noise: f64,
    pub emotion_classes: usize,
    pub emotion_offset: f64,
    pub prominence_offset: f64,
    /// Inclusive ranges.
    pub words: (usize, usize),
    pub phones_per_word: (usize, usize),
    pub frames_per_phone: (usize, usize),
    /// Unaligned frames before each word and after the last one.
    pub gap_frames: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            utterances: [60, 20, 20],
            frame_hop: 0.02,
            content_dims: 3,
            content_scale: 5.0,
            frame_noise: 2.0,
            emotion_classes: 4,
            emotion_offset: 1.0,
            prominence_offset: 1.0,
            words: (3, 6),
            phones_per_word: (2, 4),
            frames_per_phone: (3, 8),
            gap_frames: (0, 6),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn dim(&self) -> usize {
        self.content_dims + self.emotion_classes + 1
    }

    pub fn clusters(&self) -> usize {
        1 << self.content_dims
    }

    /// Corner `c` of the content cube, zero-padded to the full dimension.
    pub fn cluster_centre(&self, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for (d, slot) in v.iter_mut().enumerate().take(self.content_dims) {
            *slot = if c >> d & 1 == 1 { self.content_scale } else { -self.content_scale };
        }
        v
    }

    pub fn class_names(&self) -> Vec<String> {
        if self.emotion_classes <= EMOTIONS.len() {
            EMOTIONS[..self.emotion_classes].iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.emotion_classes).map(|i| format!("class{i}")).collect()
        }
    }

    fn validate(&self) -> Result<()> {
        let range_ok = |(a, b): (usize, usize)| a <= b;
        if !(self.frame_hop.is_finite() && self.frame_hop > 0.0) {
            return Err(Error::Config("frame hop must be positive".into()));
        }
        if self.content_dims == 0 || self.content_dims > 16 {
            return Err(Error::Config("content dims must be in 1..=16".into()));
        }
        if self.emotion_classes < 2 {
            return Err(Error::Config("need at least 2 utterance classes".into()));
        }
        if !(self.frame_noise.is_finite() && self.frame_noise >= 0.0) {
            return Err(Error::Config("frame noise must be non-negative".into()));
        }
        if self.phones_per_word.0 == 0 || self.frames_per_phone.0 == 0 {
            return Err(Error::Config("words need at least one phone of at least one frame".into()));
        }
        if ![self.words, self.phones_per_word, self.frames_per_phone, self.gap_frames]
            .into_iter()
            .all(range_ok)
        {
            return Err(Error::Config("ranges must have min <= max".into()));
        }
        Ok(())
    }
}

/// Ground truth behind one generated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub emotion: usize,
    pub prominence: Vec<u8>,
    /// Content cluster of each phone.
    pub phone_clusters: Vec<usize>,
}

fn split_for(index: usize, counts: [usize; 3]) -> Split {
    if index < counts[0] {
        Split::Train
    } else if index < counts[0] + counts[1] {
        Split::Valid
    } else {
        Split::Test
    }
}

/// Generate the corpus in split order (train, valid, test). Utterance classes cycle
/// through all classes within each split.
pub fn generate_corpus<S: Scalar>(cfg: &SyntheticConfig) -> Result<Vec<(Utterance<S>, SyntheticTruth)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.frame_noise).map_err(|e| Error::Config(e.to_string()))?;
    let total: usize = cfg.utterances.iter().sum();
    let names = cfg.class_names();
    let dim = cfg.dim();
    let mut out = Vec::with_capacity(total);
    let mut within = 0;
    let mut prev_split = None;
    for u in 0..total {
        let split = split_for(u, cfg.utterances);
        if prev_split != Some(split) {
            within = 0;
            prev_split = Some(split);
        }
        let emotion = within % cfg.emotion_classes;
        within += 1;

        // Lay out frames: gap, word, gap, word, ..., gap.
        let n_words = rng.random_range(cfg.words.0..=cfg.words.1);
        let mut frame_content: Vec<Option<usize>> = Vec::new();
        let mut frame_prominence: Vec<Option<u8>> = Vec::new();
        let mut phones = Vec::new();
        let mut words = Vec::new();
        let mut prominence = Vec::new();
        let mut phone_clusters = Vec::new();
        let t = |frame: usize| frame as f64 * cfg.frame_hop;
        let push_gap = |len: usize, content: &mut Vec<Option<usize>>, prom: &mut Vec<Option<u8>>| {
            content.extend(std::iter::repeat_n(None, len));
            prom.extend(std::iter::repeat_n(None, len));
        };
        for w in 0..n_words {
            let gap = rng.random_range(cfg.gap_frames.0..=cfg.gap_frames.1);
            push_gap(gap, &mut frame_content, &mut frame_prominence);
            let label = u8::from(rng.random_bool(0.5));
            prominence.push(label);
            let word_start = frame_content.len();
            for _ in 0..rng.random_range(cfg.phones_per_word.0..=cfg.phones_per_word.1) {
                let cluster = rng.random_range(0..cfg.clusters());
                let len = rng.random_range(cfg.frames_per_phone.0..=cfg.frames_per_phone.1);
                let start = frame_content.len();
                frame_content.extend(std::iter::repeat_n(Some(cluster), len));
                frame_prominence.extend(std::iter::repeat_n(Some(label), len));
                phones.push(Segment::new(Tier::Phone, Some(format!("c{cluster}")), t(start), t(start + len))?);
                phone_clusters.push(cluster);
            }
            words.push(Segment::new(
                Tier::Word,
                Some(format!("w{w}")),
                t(word_start),
                t(frame_content.len()),
            )?);
        }
        let tail = rng.random_range(cfg.gap_frames.0..=cfg.gap_frames.1).max(usize::from(frame_content.is_empty()));
        push_gap(tail, &mut frame_content, &mut frame_prominence);

        let num_frames = frame_content.len();
        let mut data = Vec::with_capacity(num_frames * dim);
        for (content, prom) in frame_content.iter().zip(&frame_prominence) {
            let mut v = match content {
                Some(c) => cfg.cluster_centre(*c),
                None => vec![0.0; dim],
            };
            v[cfg.content_dims + emotion] += cfg.emotion_offset;
            if let Some(p) = prom {
                v[dim - 1] += if *p == 1 { cfg.prominence_offset } else { -cfg.prominence_offset };
            }
            for x in &mut v {
                *x += noise.sample(&mut rng);
            }
            data.extend(v.into_iter().map(S::cast_f64));
        }
        let features = FeatureMatrix::new(num_frames, dim, data, cfg.frame_hop)?;
        let segmentation = Segmentation::new(t(num_frames), phones, words)?;
        let mut labels = Map::new();
        labels.insert(EMOTION_KEY.into(), json!(names[emotion]));
        labels.insert(PROMINENCE_KEY.into(), json!(prominence));
        let id = format!("{}-{u:04}", split.name());
        let utt = Utterance::new(id, split, features, segmentation, labels)?;
        out.push((
            utt,
            SyntheticTruth {
                emotion,
                prominence,
                phone_clusters,
            },
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentFormat {
    #[default]
    Json,
    TextgridLong,
    TextgridShort,
}

/// Write `features/<id>.fmat`, `alignments/<id>.{json,TextGrid}` and
/// `manifest.jsonl` under `dir`. Returns the manifest path.
pub fn write_corpus<S: Scalar>(dir: &Path, corpus: &[Utterance<S>], format: AlignmentFormat) -> Result<PathBuf> {
    let features_dir = dir.join("features");
    let align_dir = dir.join("alignments");
    for d in [&features_dir, &align_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let write = |path: &Path, bytes: &[u8]| std::fs::write(path, bytes).map_err(|e| Error::io(path, e));
    let mut entries = Vec::with_capacity(corpus.len());
    for u in corpus {
        let fpath = features_dir.join(format!("{}.fmat", u.id));
        write(&fpath, &write_fmat(&u.features))?;
        let (ext, text) = match format {
            AlignmentFormat::Json => ("json", write_json_alignment(&u.segmentation)),
            AlignmentFormat::TextgridLong => (
                "TextGrid",
                write_textgrid_long(&segmentation_to_textgrid(&u.segmentation, "phones", "words")),
            ),
            AlignmentFormat::TextgridShort => (
                "TextGrid",
                write_textgrid_short(&segmentation_to_textgrid(&u.segmentation, "phones", "words")),
            ),
        };
        let apath = align_dir.join(format!("{}.{ext}", u.id));
        write(&apath, text.as_bytes())?;
        entries.push(ManifestEntry {
            id: u.id.clone(),
            features: fpath,
            alignment: apath,
            split: u.split,
            labels: u.labels.clone(),
        });
    }
    let manifest = CorpusManifest::new(entries)?;
    let path = dir.join("manifest.jsonl");
    write(&path, manifest.to_jsonl(dir).as_bytes())?;
    Ok(path)
}
