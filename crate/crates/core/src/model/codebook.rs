use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Matrix, Tier};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Provenance of a trained codebook.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations_run: u32,
    /// Inertia of the stored centroids over the training data.
    pub final_inertia: f64,
}

/// `k` centroids of dimension `dim` for one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "CodebookRepr<S>")]
pub struct Codebook<S> {
    tier: Tier,
    centroids: Matrix<S>,
    meta: TrainingMeta,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct CodebookRepr<S> {
    tier: Tier,
    centroids: Matrix<S>,
    meta: TrainingMeta,
}

impl<S: Scalar> TryFrom<CodebookRepr<S>> for Codebook<S> {
    type Error = Error;

    fn try_from(r: CodebookRepr<S>) -> Result<Self> {
        Codebook::new(r.tier, r.centroids, r.meta)
    }
}

impl<S: Scalar> Codebook<S> {
    pub fn new(tier: Tier, centroids: Matrix<S>, meta: TrainingMeta) -> Result<Self> {
        if centroids.rows() == 0 {
            return Err(Error::invalid("codebook", "k must be at least 1"));
        }
        if centroids.cols() == 0 {
            return Err(Error::invalid("codebook", "dim must be at least 1"));
        }
        if centroids.rows() > u32::MAX as usize {
            return Err(Error::invalid("codebook", "k does not fit in u32"));
        }
        if !centroids.all_finite() {
            return Err(Error::NonFinite("codebook centroids"));
        }
        Ok(Codebook {
            tier,
            centroids,
            meta,
        })
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    /// Vocabulary size.
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroid(&self, code: usize) -> &[S] {
        self.centroids.row(code)
    }

    pub fn centroids(&self) -> &Matrix<S> {
        &self.centroids
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Centroid for `code`, or `CodeOutOfRange`.
    pub fn lookup(&self, code: u32) -> Result<&[S]> {
        if (code as usize) < self.k() {
            Ok(self.centroid(code as usize))
        } else {
            Err(Error::CodeOutOfRange {
                tier: self.tier,
                code,
                k: self.k(),
            })
        }
    }
}

/// Per-dimension z-scoring applied to features before pooling and quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fit on the rows of every matrix. Zero-variance dimensions get unit scale.
    pub fn fit<'a, S: Scalar>(mats: impl IntoIterator<Item = &'a Matrix<S>>) -> Result<Self> {
        let mut dim = None;
        let mut count = 0usize;
        let mut sum = Vec::new();
        let mut sumsq = Vec::new();
        for m in mats {
            let d = *dim.get_or_insert(m.cols());
            if d != m.cols() {
                return Err(Error::DimensionMismatch {
                    context: "standardizer fit",
                    expected: d,
                    found: m.cols(),
                });
            }
            if sum.is_empty() {
                sum = vec![0.0; d];
                sumsq = vec![0.0; d];
            }
            for row in m.iter_rows() {
                for (j, &v) in row.iter().enumerate() {
                    let v = v.as_f64();
                    sum[j] += v;
                    sumsq[j] += v * v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyInput("standardizer fit"));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sumsq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / n - m * m).max(0.0);
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<S: Scalar>(&self, features: &FeatureMatrix<S>) -> Result<FeatureMatrix<S>> {
        FeatureMatrix::from_matrix(self.apply_rows(features.matrix())?, features.frame_hop())
    }

    /// Standardize each row of `m`.
    pub fn apply_rows<S: Scalar>(&self, m: &Matrix<S>) -> Result<Matrix<S>> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "standardizer",
                expected: self.dim(),
                found: m.cols(),
            });
        }
        let data = m
            .iter_rows()
            .flat_map(|row| {
                row.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(&v, (mu, s))| S::cast_f64((v.as_f64() - mu) / s))
            })
            .collect();
        Matrix::from_vec(m.rows(), m.cols(), data)
    }
}

/// One codebook per tier, in [`Tier::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "SvcModelRepr<S>")]
pub struct SvcModel<S> {
    codebooks: [Codebook<S>; 4],
    frame_hop: f64,
    standardizer: Option<Standardizer>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct SvcModelRepr<S> {
    codebooks: [Codebook<S>; 4],
    frame_hop: f64,
    standardizer: Option<Standardizer>,
}

impl<S: Scalar> TryFrom<SvcModelRepr<S>> for SvcModel<S> {
    type Error = Error;

    fn try_from(r: SvcModelRepr<S>) -> Result<Self> {
        SvcModel::new(r.codebooks, r.frame_hop, r.standardizer)
    }
}

impl<S: Scalar> SvcModel<S> {
    pub fn new(
        codebooks: [Codebook<S>; 4],
        frame_hop: f64,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        for (cb, tier) in codebooks.iter().zip(Tier::ALL) {
            if cb.tier() != tier {
                return Err(Error::ModelMismatch(format!(
                    "slot for {tier} holds a {} codebook",
                    cb.tier()
                )));
            }
        }
        let dim = codebooks[0].dim();
        if let Some(cb) = codebooks.iter().find(|cb| cb.dim() != dim) {
            return Err(Error::ModelMismatch(format!(
                "{} codebook has dim {} but frame codebook has dim {dim}",
                cb.tier(),
                cb.dim()
            )));
        }
        if let Some(st) = &standardizer {
            if st.dim() != dim || st.std.len() != dim {
                return Err(Error::ModelMismatch(format!(
                    "standardizer has dim {} but codebooks have dim {dim}",
                    st.dim()
                )));
            }
        }
        if !(frame_hop.is_finite() && frame_hop > 0.0) {
            return Err(Error::invalid("model", "frame hop must be positive"));
        }
        Ok(SvcModel {
            codebooks,
            frame_hop,
            standardizer,
        })
    }

    pub fn codebook(&self, tier: Tier) -> &Codebook<S> {
        &self.codebooks[tier.index()]
    }

    pub fn codebooks(&self) -> &[Codebook<S>; 4] {
        &self.codebooks
    }

    pub fn dim(&self) -> usize {
        self.codebooks[0].dim()
    }

    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    /// Vocabulary sizes in tier order.
    pub fn vocab_sizes(&self) -> [usize; 4] {
        Tier::ALL.map(|t| self.codebook(t).k())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cb(tier: Tier, k: usize, dim: usize) -> Codebook<f32> {
        Codebook::new(tier, Matrix::zeros(k, dim), TrainingMeta::default()).unwrap()
    }

    #[test]
    fn codebook_invariants() {
        assert!(Codebook::<f32>::new(Tier::Frame, Matrix::zeros(0, 2), TrainingMeta::default()).is_err());
        assert!(Codebook::<f32>::new(Tier::Frame, Matrix::zeros(2, 0), TrainingMeta::default()).is_err());
        let bad = Matrix::from_vec(1, 1, vec![f32::NAN]).unwrap();
        assert!(Codebook::new(Tier::Frame, bad, TrainingMeta::default()).is_err());
        let c = cb(Tier::Word, 3, 2);
        assert!(c.lookup(2).is_ok());
        assert!(matches!(c.lookup(3), Err(Error::CodeOutOfRange { code: 3, k: 3, .. })));
    }

    #[test]
    fn model_invariants() {
        let ok = SvcModel::new(
            [cb(Tier::Frame, 4, 2), cb(Tier::Phone, 2, 2), cb(Tier::Word, 2, 2), cb(Tier::Utterance, 1, 2)],
            0.02,
            None,
        )
        .unwrap();
        assert_eq!(ok.vocab_sizes(), [4, 2, 2, 1]);
        let dim = SvcModel::new(
            [cb(Tier::Frame, 4, 2), cb(Tier::Phone, 2, 3), cb(Tier::Word, 2, 2), cb(Tier::Utterance, 1, 2)],
            0.02,
            None,
        );
        assert!(matches!(dim, Err(Error::ModelMismatch(_))));
        let order = SvcModel::new(
            [cb(Tier::Phone, 4, 2), cb(Tier::Frame, 2, 2), cb(Tier::Word, 2, 2), cb(Tier::Utterance, 1, 2)],
            0.02,
            None,
        );
        assert!(order.is_err());
        let json = serde_json::to_string(&ok).unwrap();
        assert_eq!(serde_json::from_str::<SvcModel<f32>>(&json).unwrap(), ok);
    }

    #[test]
    fn standardizer_zscores() {
        let m = Matrix::from_rows(2, [[1.0f32, 5.0], [3.0, 5.0]]).unwrap();
        let st = Standardizer::fit([&m]).unwrap();
        assert_eq!(st.mean, vec![2.0, 5.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        let f = FeatureMatrix::from_matrix(m, 0.02).unwrap();
        let z = st.apply(&f).unwrap();
        assert_eq!(z.frame(0), &[-1.0, 0.0]);
        assert_eq!(z.frame(1), &[1.0, 0.0]);
    }
}
