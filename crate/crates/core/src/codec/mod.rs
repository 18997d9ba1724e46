//! Corpus-level training, encoding to four unit streams, fusion and bitrate.

mod manifest;
mod store;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use manifest::{CorpusManifest, ManifestEntry, Split};
pub use store::{load_model, save_model, MODEL_FILE};

use crate::alignment::{build_frame_span_map, check_frame_count, load_alignment, AlignmentOptions};
use crate::error::{Error, Result};
use crate::format::read_fmat;
use crate::model::{
    BitrateReport, Codebook, DsuStream, EncodedUtterance, FeatureMatrix, FrameSpanMap,
    FusedFrameSequence, Matrix, Segmentation, Standardizer, StreamBits, SvcModel, Tier,
};
use crate::pooling::{fuse_streams, pool_segments};
use crate::quantizer::{assign_batch, train_codebook, KMeansParams, TrainingStats};
use crate::scalar::Scalar;

/// Features, alignment and frame bridge for one corpus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance<S> {
    pub id: String,
    pub split: Split,
    pub features: FeatureMatrix<S>,
    pub segmentation: Segmentation,
    pub span_map: FrameSpanMap,
    pub labels: Map<String, Value>,
}

impl<S: Scalar> Utterance<S> {
    pub fn new(
        id: impl Into<String>,
        split: Split,
        features: FeatureMatrix<S>,
        segmentation: Segmentation,
        labels: Map<String, Value>,
    ) -> Result<Self> {
        let hop = features.frame_hop();
        check_frame_count(&segmentation, hop, features.num_frames())?;
        let span_map = build_frame_span_map(&segmentation, hop, features.num_frames());
        Ok(Utterance {
            id: id.into(),
            split,
            features,
            segmentation,
            span_map,
            labels,
        })
    }

    pub fn load(entry: &ManifestEntry, opts: &AlignmentOptions) -> Result<Self> {
        let bytes = std::fs::read(&entry.features).map_err(|e| Error::io(&entry.features, e))?;
        let features = read_fmat(&bytes)?;
        let segmentation = load_alignment(&entry.alignment, opts)?;
        Utterance::new(entry.id.clone(), entry.split, features, segmentation, entry.labels.clone())
    }
}

/// Load manifest entries (optionally one split) in parallel, keeping manifest order.
pub fn load_corpus<S: Scalar>(
    manifest: &CorpusManifest,
    opts: &AlignmentOptions,
    split: Option<Split>,
) -> Result<Vec<Utterance<S>>> {
    manifest
        .entries()
        .par_iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .map(|e| Utterance::load(e, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Codebook sizes in [`Tier::ALL`] order.
    pub k_per_tier: [usize; 4],
    pub seed: u64,
    pub kmeans: KMeansParams,
    /// Z-score each feature dimension (statistics from the training frames) before
    /// pooling and clustering.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_per_tier: [500, 500, 500, 500],
            seed: 0,
            kmeans: KMeansParams::default(),
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TierTrainingReport {
    pub tier: Tier,
    pub k: usize,
    pub points: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub stats: TrainingStats,
}

#[derive(Debug, Clone)]
pub struct TrainedModel<S> {
    pub model: SvcModel<S>,
    pub reports: [TierTrainingReport; 4],
}

/// Rows each tier's codebook is trained on: raw frames for the frame tier and
/// segment means for the others, concatenated in corpus order.
pub fn training_sets<S: Scalar>(
    corpus: &[&Utterance<S>],
    standardizer: Option<&Standardizer>,
) -> Result<[Matrix<S>; 4]> {
    let dim = corpus.first().map(|u| u.features.dim()).unwrap_or(0);
    let per_utt: Vec<[Matrix<S>; 4]> = corpus
        .par_iter()
        .map(|u| {
            let features = match standardizer {
                Some(st) => st.apply(&u.features)?,
                None => u.features.clone(),
            };
            let pooled = |t| pool_segments(&features, &u.span_map, t).map(|p| p.vectors);
            Ok([
                features.matrix().clone(),
                pooled(Tier::Phone)?,
                pooled(Tier::Word)?,
                pooled(Tier::Utterance)?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut sets = [(); 4].map(|_| Matrix::zeros(0, dim));
    for mats in &per_utt {
        for (set, m) in sets.iter_mut().zip(mats) {
            set.extend_rows(m);
        }
    }
    Ok(sets)
}

/// Train the four codebooks on the train split of `corpus`.
pub fn train_svc<S: Scalar>(corpus: &[Utterance<S>], cfg: &TrainConfig) -> Result<TrainedModel<S>> {
    let train: Vec<&Utterance<S>> = corpus.iter().filter(|u| u.split == Split::Train).collect();
    let first = *train.first().ok_or_else(|| Error::EmptySplit("train".into()))?;
    let dim = first.features.dim();
    let hop = first.features.frame_hop();
    for u in &train {
        if u.features.dim() != dim {
            return Err(Error::DimMismatchAcrossCorpus {
                first: dim,
                other: u.features.dim(),
                utterance: u.id.clone(),
            });
        }
        if (u.features.frame_hop() - hop).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "utterance {} has frame hop {} but {} has {hop}",
                u.id,
                u.features.frame_hop(),
                first.id
            )));
        }
    }
    let standardizer = if cfg.standardize {
        Some(Standardizer::fit(train.iter().map(|u| u.features.matrix()))?)
    } else {
        None
    };
    let sets = training_sets(&train, standardizer.as_ref())?;
    // Fail on the first tier without enough points before spending time on any.
    for (tier, set) in Tier::ALL.into_iter().zip(&sets) {
        let k = cfg.k_per_tier[tier.index()];
        if set.rows() < k {
            return Err(Error::TooFewPoints {
                tier: Some(tier),
                points: set.rows(),
                k,
            });
        }
    }
    let trained: Vec<(Codebook<S>, TierTrainingReport)> = Tier::ALL
        .par_iter()
        .map(|&tier| {
            let k = cfg.k_per_tier[tier.index()];
            let seed = cfg.seed.wrapping_add(tier.seed_offset());
            let data = &sets[tier.index()];
            let (cb, stats) = train_codebook(tier, data, k, seed, &cfg.kmeans)?;
            let report = TierTrainingReport {
                tier,
                k,
                points: data.rows(),
                seed,
                stats,
            };
            Ok((cb, report))
        })
        .collect::<Result<_>>()?;
    let (codebooks, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    let model = SvcModel::new(
        codebooks.try_into().unwrap_or_else(|_| unreachable!("one entry per tier")),
        hop,
        standardizer,
    )?;
    Ok(TrainedModel {
        model,
        reports: reports.try_into().unwrap_or_else(|_| unreachable!("one entry per tier")),
    })
}

fn check_features<S: Scalar>(model: &SvcModel<S>, features: &FeatureMatrix<S>) -> Result<()> {
    if features.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "encode",
            expected: model.dim(),
            found: features.dim(),
        });
    }
    if (features.frame_hop() - model.frame_hop()).abs() > 1e-9 {
        return Err(Error::ModelMismatch(format!(
            "features have frame hop {} but the model was trained at {}",
            features.frame_hop(),
            model.frame_hop()
        )));
    }
    Ok(())
}

/// Quantize every frame and every covered phone, word and utterance segment.
pub fn encode_utterance<S: Scalar>(
    model: &SvcModel<S>,
    utterance_id: &str,
    features: &FeatureMatrix<S>,
    seg: &Segmentation,
) -> Result<EncodedUtterance> {
    check_features(model, features)?;
    check_frame_count(seg, features.frame_hop(), features.num_frames())?;
    let span_map = build_frame_span_map(seg, features.frame_hop(), features.num_frames());
    encode_with_span_map(model, utterance_id, features, span_map)
}

/// [`encode_utterance`] for an already loaded corpus entry.
pub fn encode<S: Scalar>(model: &SvcModel<S>, utt: &Utterance<S>) -> Result<EncodedUtterance> {
    check_features(model, &utt.features)?;
    encode_with_span_map(model, &utt.id, &utt.features, utt.span_map.clone())
}

fn encode_with_span_map<S: Scalar>(
    model: &SvcModel<S>,
    utterance_id: &str,
    features: &FeatureMatrix<S>,
    span_map: FrameSpanMap,
) -> Result<EncodedUtterance> {
    let standardized;
    let features = match model.standardizer() {
        Some(st) => {
            standardized = st.apply(features)?;
            &standardized
        }
        None => features,
    };
    let frame = DsuStream::new(
        Tier::Frame,
        assign_batch(model.codebook(Tier::Frame), features.matrix())?,
    );
    let pooled = |tier: Tier| -> Result<DsuStream> {
        let p = pool_segments(features, &span_map, tier)?;
        Ok(DsuStream::new(tier, assign_batch(model.codebook(tier), &p.vectors)?))
    };
    let streams = [frame, pooled(Tier::Phone)?, pooled(Tier::Word)?, pooled(Tier::Utterance)?];
    let duration = features.num_frames() as f64 * features.frame_hop();
    EncodedUtterance::new(utterance_id.to_string(), duration, features.frame_hop(), streams, span_map)
}

/// Frame-rate continuous sequence reconstructed from the four streams.
pub fn decode_fused<S: Scalar>(model: &SvcModel<S>, encoded: &EncodedUtterance) -> Result<FusedFrameSequence<S>> {
    fuse_streams(encoded, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitrateMode {
    /// Count the frame stream only, as a single-codebook frame-level baseline would.
    FramesOnly,
    #[default]
    Full,
}

/// Sum over streams of `units * log2(vocab_size)`, divided by the utterance duration.
pub fn utterance_bitrate<S: Scalar>(
    encoded: &EncodedUtterance,
    model: &SvcModel<S>,
    mode: BitrateMode,
) -> Result<BitrateReport> {
    let tiers: &[Tier] = match mode {
        BitrateMode::FramesOnly => &[Tier::Frame],
        BitrateMode::Full => &Tier::ALL,
    };
    let streams = tiers
        .iter()
        .map(|&tier| {
            let units = encoded.stream(tier).len();
            let vocab_size = model.codebook(tier).k();
            StreamBits {
                tier,
                units,
                vocab_size,
                bits: units as f64 * (vocab_size as f64).log2(),
            }
        })
        .collect();
    BitrateReport::new(encoded.utterance_id(), streams, encoded.duration())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusBitrate {
    pub utterances: usize,
    /// Unweighted mean of the per-utterance rates.
    pub mean_bps: f64,
    /// Total bits over total seconds.
    pub totals_bps: f64,
    pub total_bits: f64,
    pub total_duration: f64,
}

/// Sums run in utterance-id order, so the result does not depend on report order.
pub fn corpus_bitrate(reports: &[BitrateReport]) -> Result<CorpusBitrate> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("bitrate reports"));
    }
    let mut reports: Vec<&BitrateReport> = reports.iter().collect();
    reports.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let n = reports.len() as f64;
    let total_bits: f64 = reports.iter().map(|r| r.total_bits).sum();
    let total_duration: f64 = reports.iter().map(|r| r.duration).sum();
    Ok(CorpusBitrate {
        utterances: reports.len(),
        mean_bps: reports.iter().map(|r| r.bits_per_second).sum::<f64>() / n,
        totals_bps: total_bits / total_duration,
        total_bits,
        total_duration,
    })
}

pub fn encoded_to_json(encoded: &EncodedUtterance) -> String {
    serde_json::to_string_pretty(encoded).expect("encoded utterances serialize")
}

pub fn read_encoded(path: &Path) -> Result<EncodedUtterance> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::MalformedJson(format!("{}: {e}", path.display())))
}
