//! Segment mean pooling (before and after quantization) and multi-stream fusion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    Codebook, DsuStream, EncodedUtterance, FeatureMatrix, FrameSpanMap, FusedFrameSequence, Matrix,
    SvcModel, Tier,
};
use crate::scalar::Scalar;

/// One pooled vector per covered segment of a tier, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSegments<S> {
    pub tier: Tier,
    /// Index into [`crate::model::Segmentation::segments`] for each row of `vectors`.
    pub segment_indices: Vec<usize>,
    pub vectors: Matrix<S>,
    /// Segments that contain no frame centre and so produced no vector.
    pub empty_segments: usize,
}

impl<S> PooledSegments<S> {
    pub fn len(&self) -> usize {
        self.segment_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_indices.is_empty()
    }
}

fn require_pooled_tier(tier: Tier) -> Result<()> {
    if tier == Tier::Frame {
        return Err(Error::Config("the frame tier is not pooled".into()));
    }
    Ok(())
}

/// Mean of `rows(n)` over every covered run, summed in f64 in frame order.
fn pool_runs<'a, S: Scalar>(
    span_map: &FrameSpanMap,
    tier: Tier,
    dim: usize,
    row: impl Fn(usize) -> &'a [S],
) -> PooledSegments<S> {
    let runs = span_map.covered_runs(tier);
    let mut vectors = Matrix::zeros(0, dim);
    let mut acc = vec![0.0f64; dim];
    let mut segment_indices = Vec::with_capacity(runs.len());
    for (seg, range) in runs {
        acc.fill(0.0);
        let count = range.len() as f64;
        for n in range {
            for (a, &v) in acc.iter_mut().zip(row(n)) {
                *a += v.as_f64();
            }
        }
        let mean: Vec<S> = acc.iter().map(|a| S::cast_f64(a / count)).collect();
        vectors.push_row(&mean);
        segment_indices.push(seg);
    }
    PooledSegments {
        tier,
        empty_segments: span_map.segment_count(tier) - segment_indices.len(),
        segment_indices,
        vectors,
    }
}

/// Mean-pool continuous frame vectors within each covered segment of `tier`.
pub fn pool_segments<S: Scalar>(
    features: &FeatureMatrix<S>,
    span_map: &FrameSpanMap,
    tier: Tier,
) -> Result<PooledSegments<S>> {
    require_pooled_tier(tier)?;
    if span_map.num_frames() != features.num_frames() {
        return Err(Error::DimensionMismatch {
            context: "pool_segments frame count",
            expected: features.num_frames(),
            found: span_map.num_frames(),
        });
    }
    Ok(pool_runs(span_map, tier, features.dim(), |n| features.frame(n)))
}

/// Mean-pool the decoded centroids of frame codes within each covered segment.
pub fn post_pool_codes<S: Scalar>(
    frame_codes: &DsuStream,
    frame_codebook: &Codebook<S>,
    span_map: &FrameSpanMap,
    tier: Tier,
) -> Result<PooledSegments<S>> {
    require_pooled_tier(tier)?;
    if frame_codes.len() != span_map.num_frames() {
        return Err(Error::DimensionMismatch {
            context: "post_pool_codes frame count",
            expected: span_map.num_frames(),
            found: frame_codes.len(),
        });
    }
    for &c in &frame_codes.codes {
        frame_codebook.lookup(c)?;
    }
    Ok(pool_runs(span_map, tier, frame_codebook.dim(), |n| {
        frame_codebook.centroid(frame_codes.codes[n] as usize)
    }))
}

/// Average, per frame, the centroids of the frame code and of every segment code
/// covering that frame. Tiers that do not cover a frame are left out of its mean.
pub fn fuse_streams<S: Scalar>(
    encoded: &EncodedUtterance,
    model: &SvcModel<S>,
) -> Result<FusedFrameSequence<S>> {
    if (encoded.frame_hop() - model.frame_hop()).abs() > 1e-9 {
        return Err(Error::ModelMismatch(format!(
            "utterance frame hop {} differs from model frame hop {}",
            encoded.frame_hop(),
            model.frame_hop()
        )));
    }
    for tier in Tier::ALL {
        let cb = model.codebook(tier);
        for &c in &encoded.stream(tier).codes {
            cb.lookup(c)?;
        }
    }
    let span_map = encoded.span_map();
    let positions: Vec<Vec<Option<usize>>> =
        Tier::POOLED.iter().map(|&t| span_map.stream_positions(t)).collect();
    let dim = model.dim();
    let t_frames = encoded.num_frames();
    let mut out = vec![S::zero(); t_frames * dim];
    out.par_chunks_mut(dim).enumerate().for_each(|(n, slot)| {
        let mut acc = vec![0.0f64; dim];
        let mut add = |v: &[S]| {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x.as_f64();
            }
        };
        let frame_code = encoded.stream(Tier::Frame).codes[n] as usize;
        add(model.codebook(Tier::Frame).centroid(frame_code));
        let mut count = 1usize;
        for (tier, pos) in Tier::POOLED.iter().zip(&positions) {
            if let Some(p) = pos[n] {
                let code = encoded.stream(*tier).codes[p] as usize;
                add(model.codebook(*tier).centroid(code));
                count += 1;
            }
        }
        for (o, a) in slot.iter_mut().zip(&acc) {
            *o = S::cast_f64(a / count as f64);
        }
    });
    FusedFrameSequence::new(Matrix::from_vec(t_frames, dim, out)?, encoded.frame_hop())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::build_frame_span_map;
    use crate::model::{Segment, Segmentation, TrainingMeta};

    fn features(rows: &[&[f32]]) -> FeatureMatrix<f32> {
        let m = Matrix::from_rows(rows[0].len(), rows.iter().copied()).unwrap();
        FeatureMatrix::from_matrix(m, 0.02).unwrap()
    }

    fn utterance_only(t: usize) -> FrameSpanMap {
        let seg = Segmentation::new(t as f64 * 0.02, vec![], vec![]).unwrap();
        build_frame_span_map(&seg, 0.02, t)
    }

    fn codebook(tier: Tier, rows: &[&[f32]]) -> Codebook<f32> {
        let m = Matrix::from_rows(rows[0].len(), rows.iter().copied()).unwrap();
        Codebook::new(tier, m, TrainingMeta::default()).unwrap()
    }

    #[test]
    fn mean_of_two_rows() {
        let f = features(&[&[1.0, 3.0], &[3.0, 5.0]]);
        let p = pool_segments(&f, &utterance_only(2), Tier::Utterance).unwrap();
        assert_eq!(p.vectors.row(0), &[2.0, 4.0]);
        assert_eq!(p.segment_indices, vec![0]);
    }

    #[test]
    fn single_frame_is_identity() {
        let f = features(&[&[0.1, -7.25], &[9.0, 9.0]]);
        let seg = Segmentation::new(
            0.04,
            vec![Segment::new(Tier::Phone, None, 0.0, 0.02).unwrap()],
            vec![],
        )
        .unwrap();
        let map = build_frame_span_map(&seg, 0.02, 2);
        let p = pool_segments(&f, &map, Tier::Phone).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.vectors.row(0), f.frame(0));
    }

    #[test]
    fn constant_input_over_words() {
        let v = [0.3f32, -1.7, 2.9];
        let rows: Vec<&[f32]> = (0..50).map(|_| &v[..]).collect();
        let f = features(&rows);
        let words = [(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)]
            .iter()
            .map(|&(a, b)| Segment::new(Tier::Word, None, a, b).unwrap())
            .collect();
        let seg = Segmentation::new(1.0, vec![], words).unwrap();
        let p = pool_segments(&f, &build_frame_span_map(&seg, 0.02, 50), Tier::Word).unwrap();
        assert_eq!(p.len(), 3);
        for r in p.vectors.iter_rows() {
            for (a, b) in r.iter().zip(&v) {
                assert!((a - b).abs() <= 1e-6 * b.abs());
            }
        }
    }

    #[test]
    fn empty_segments_counted() {
        let f = features(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0]]);
        let phones = [(0.0, 0.012), (0.012, 0.018), (0.018, 0.1)]
            .iter()
            .map(|&(a, b)| Segment::new(Tier::Phone, None, a, b).unwrap())
            .collect();
        let seg = Segmentation::new(0.1, phones, vec![]).unwrap();
        let p = pool_segments(&f, &build_frame_span_map(&seg, 0.02, 5), Tier::Phone).unwrap();
        assert_eq!(p.segment_indices, vec![0, 2]);
        assert_eq!(p.empty_segments, 1);
        assert_eq!(p.vectors.row(1), &[3.5]);
    }

    #[test]
    fn pool_errors() {
        let f = features(&[&[1.0], &[2.0]]);
        assert!(matches!(
            pool_segments(&f, &utterance_only(3), Tier::Utterance),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(pool_segments(&f, &utterance_only(2), Tier::Frame).is_err());
    }

    #[test]
    fn post_pool_constant_and_midpoint() {
        let cb = codebook(Tier::Frame, &[&[0.0, 0.0], &[2.0, 2.0], &[5.0, -1.0]]);
        let map = utterance_only(2);
        let mid = post_pool_codes(&DsuStream::new(Tier::Frame, vec![0, 1]), &cb, &map, Tier::Utterance).unwrap();
        assert_eq!(mid.vectors.row(0), &[1.0, 1.0]);
        let same = post_pool_codes(&DsuStream::new(Tier::Frame, vec![2, 2]), &cb, &map, Tier::Utterance).unwrap();
        assert_eq!(same.vectors.row(0), cb.centroid(2));
        assert!(matches!(
            post_pool_codes(&DsuStream::new(Tier::Frame, vec![0, 3]), &cb, &map, Tier::Utterance),
            Err(Error::CodeOutOfRange { code: 3, .. })
        ));
        assert!(matches!(
            post_pool_codes(&DsuStream::new(Tier::Frame, vec![0]), &cb, &map, Tier::Utterance),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn four_tier_model(frame: &[&[f32]], phone: &[&[f32]], word: &[&[f32]], utt: &[&[f32]]) -> SvcModel<f32> {
        SvcModel::new(
            [
                codebook(Tier::Frame, frame),
                codebook(Tier::Phone, phone),
                codebook(Tier::Word, word),
                codebook(Tier::Utterance, utt),
            ],
            0.02,
            None,
        )
        .unwrap()
    }

    #[test]
    fn fusion_rules() {
        // frame 0 covered by all tiers, frame 1 only by frame and utterance
        let seg = Segmentation::new(
            0.04,
            vec![Segment::new(Tier::Phone, None, 0.0, 0.02).unwrap()],
            vec![Segment::new(Tier::Word, None, 0.0, 0.02).unwrap()],
        )
        .unwrap();
        let map = build_frame_span_map(&seg, 0.02, 2);
        let model = four_tier_model(
            &[&[1.0, 0.0], &[3.0, 0.0]],
            &[&[0.0, 4.0]],
            &[&[8.0, 8.0]],
            &[&[-1.0, 0.0]],
        );
        let enc = EncodedUtterance::new(
            "u".into(),
            0.04,
            0.02,
            [
                DsuStream::new(Tier::Frame, vec![0, 1]),
                DsuStream::new(Tier::Phone, vec![0]),
                DsuStream::new(Tier::Word, vec![0]),
                DsuStream::new(Tier::Utterance, vec![0]),
            ],
            map,
        )
        .unwrap();
        let fused = fuse_streams(&enc, &model).unwrap();
        assert_eq!(fused.num_frames(), 2);
        assert_eq!(fused.frame(0), &[(1.0 + 0.0 + 8.0 - 1.0) / 4.0, (0.0 + 4.0 + 8.0 + 0.0) / 4.0]);
        assert_eq!(fused.frame(1), &[(3.0 - 1.0) / 2.0, 0.0]);
    }

    #[test]
    fn fusion_rejects_bad_codes_and_hop() {
        let map = utterance_only(2);
        let model = four_tier_model(&[&[1.0]], &[&[1.0]], &[&[1.0]], &[&[1.0]]);
        let streams = |frame: Vec<u32>| {
            [
                DsuStream::new(Tier::Frame, frame),
                DsuStream::new(Tier::Phone, vec![]),
                DsuStream::new(Tier::Word, vec![]),
                DsuStream::new(Tier::Utterance, vec![0]),
            ]
        };
        let bad = EncodedUtterance::new("u".into(), 0.04, 0.02, streams(vec![0, 1]), map.clone()).unwrap();
        assert!(matches!(fuse_streams(&bad, &model), Err(Error::CodeOutOfRange { .. })));
        let hop = EncodedUtterance::new("u".into(), 0.08, 0.04, streams(vec![0, 0]), map).unwrap();
        assert!(matches!(fuse_streams(&hop, &model), Err(Error::ModelMismatch(_))));
    }
}
