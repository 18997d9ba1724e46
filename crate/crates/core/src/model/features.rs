use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frame-wise continuous representations: one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "FeatureRepr<S>")]
pub struct FeatureMatrix<S> {
    values: Matrix<S>,
    frame_hop: f64,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct FeatureRepr<S> {
    values: Matrix<S>,
    frame_hop: f64,
}

impl<S: Scalar> TryFrom<FeatureRepr<S>> for FeatureMatrix<S> {
    type Error = Error;

    fn try_from(r: FeatureRepr<S>) -> Result<Self> {
        FeatureMatrix::from_matrix(r.values, r.frame_hop)
    }
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn new(num_frames: usize, dim: usize, values: Vec<S>, frame_hop: f64) -> Result<Self> {
        Self::from_matrix(Matrix::from_vec(num_frames, dim, values)?, frame_hop)
    }

    pub fn from_matrix(values: Matrix<S>, frame_hop: f64) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::invalid("feature matrix", "needs at least one frame"));
        }
        if values.cols() == 0 {
            return Err(Error::invalid("feature matrix", "dim must be at least 1"));
        }
        if !(frame_hop.is_finite() && frame_hop > 0.0) {
            return Err(Error::invalid(
                "feature matrix",
                format!("frame hop must be positive, got {frame_hop}"),
            ));
        }
        if !values.all_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix { values, frame_hop })
    }

    pub fn num_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    /// `num_frames * frame_hop`.
    pub fn duration(&self) -> f64 {
        self.num_frames() as f64 * self.frame_hop
    }

    pub fn frame(&self, n: usize) -> &[S] {
        self.values.row(n)
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.values
    }
}

/// Frame-aligned output of stream fusion; rows are the fused vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "FeatureRepr<S>")]
pub struct FusedFrameSequence<S> {
    values: Matrix<S>,
    frame_hop: f64,
}

impl<S: Scalar> TryFrom<FeatureRepr<S>> for FusedFrameSequence<S> {
    type Error = Error;

    fn try_from(r: FeatureRepr<S>) -> Result<Self> {
        FusedFrameSequence::new(r.values, r.frame_hop)
    }
}

impl<S: Scalar> FusedFrameSequence<S> {
    pub fn new(values: Matrix<S>, frame_hop: f64) -> Result<Self> {
        // same invariants as a feature matrix
        let m = FeatureMatrix::from_matrix(values, frame_hop)?;
        Ok(FusedFrameSequence {
            frame_hop: m.frame_hop,
            values: m.values,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    pub fn frame(&self, n: usize) -> &[S] {
        self.values.row(n)
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.values
    }

    /// Reinterpret as a feature matrix (for writing to FMAT or further probing).
    pub fn into_features(self) -> FeatureMatrix<S> {
        FeatureMatrix {
            values: self.values,
            frame_hop: self.frame_hop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_violations() {
        assert!(FeatureMatrix::<f32>::new(0, 2, vec![], 0.02).is_err());
        assert!(FeatureMatrix::<f32>::new(1, 0, vec![], 0.02).is_err());
        assert!(FeatureMatrix::new(1, 1, vec![1.0f32], 0.0).is_err());
        assert!(FeatureMatrix::new(1, 1, vec![1.0f32], -0.02).is_err());
        assert!(matches!(
            FeatureMatrix::new(1, 2, vec![1.0f32, f32::NAN], 0.02),
            Err(Error::NonFinite(_))
        ));
        assert!(FeatureMatrix::new(1, 1, vec![f32::INFINITY], 0.02).is_err());
        let m = FeatureMatrix::new(2, 1, vec![1.0f32, 2.0], 0.02).unwrap();
        assert_eq!(m.duration(), 0.04);
    }

    #[test]
    fn serde_validates() {
        let m = FeatureMatrix::new(2, 2, vec![1.0f32, 2.0, 3.0, 4.0], 0.02).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<FeatureMatrix<f32>>(&s).unwrap(), m);
        let bad = s.replace("0.02", "0.0");
        assert!(serde_json::from_str::<FeatureMatrix<f32>>(&bad).is_err());
    }
}
