//! Codebook training and nearest-centroid assignment.

mod kmeans;

use rayon::prelude::*;

pub use kmeans::{inertia, kmeanspp_init, lloyd_train, train_codebook, KMeansParams, LloydOutcome, TrainingStats};
pub use crate::format::{load_codebook, save_codebook};

use crate::error::{Error, Result};
use crate::model::{Codebook, Matrix};
use crate::scalar::{dot, squared_distance, squared_norm, Scalar};

fn check_vector<S: Scalar>(codebook: &Codebook<S>, v: &[S]) -> Result<()> {
    if v.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            context: "assign",
            expected: codebook.dim(),
            found: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("query vector"));
    }
    Ok(())
}

#[inline]
fn argmin_exact<S: Scalar>(codebook: &Codebook<S>, v: &[S], candidates: impl Iterator<Item = usize>) -> u32 {
    let mut best = (0usize, f64::INFINITY);
    for c in candidates {
        let d = squared_distance(v, codebook.centroid(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0 as u32
}

/// Nearest centroid by Euclidean distance; ties go to the lowest code id.
pub fn assign<S: Scalar>(codebook: &Codebook<S>, vector: &[S]) -> Result<u32> {
    check_vector(codebook, vector)?;
    Ok(argmin_exact(codebook, vector, 0..codebook.k()))
}

/// Row-wise [`assign`], using `|x|^2 - 2 x.c + |c|^2` with cached centroid norms
/// to shortlist candidates and the direct distance to pick among near ties, so the
/// result matches [`assign`] exactly.
pub fn assign_batch<S: Scalar>(codebook: &Codebook<S>, matrix: &Matrix<S>) -> Result<Vec<u32>> {
    if matrix.cols() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            context: "assign_batch",
            expected: codebook.dim(),
            found: matrix.cols(),
        });
    }
    if !matrix.all_finite() {
        return Err(Error::NonFinite("query matrix"));
    }
    let norms: Vec<f64> = codebook.centroids().iter_rows().map(squared_norm).collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let k = codebook.k();
    let codes = (0..matrix.rows())
        .into_par_iter()
        .map(|i| {
            let x = matrix.row(i);
            let xn = squared_norm(x);
            let approx: Vec<f64> = (0..k)
                .map(|c| xn - 2.0 * dot(x, codebook.centroid(c)) + norms[c])
                .collect();
            let min = approx.iter().copied().fold(f64::INFINITY, f64::min);
            // generous bound on the cancellation error of the expanded form
            let slack = 1e-9 * (xn + max_norm) + f64::MIN_POSITIVE;
            argmin_exact(codebook, x, (0..k).filter(|&c| approx[c] <= min + slack))
        })
        .collect();
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Tier, TrainingMeta};

    fn cb(rows: &[&[f32]]) -> Codebook<f32> {
        Codebook::new(
            Tier::Frame,
            Matrix::from_rows(rows[0].len(), rows.iter().copied()).unwrap(),
            TrainingMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn exact_match_and_tie() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, (i * i) as f32]).collect();
        let refs: Vec<&[f32]> = rows.iter().map(|r| &r[..]).collect();
        let c = cb(&refs);
        assert_eq!(assign(&c, &[7.0, 49.0]).unwrap(), 7);
        let c = cb(&[&[0.0], &[2.0]]);
        assert_eq!(assign(&c, &[1.0]).unwrap(), 0);
        assert_eq!(assign_batch(&c, &Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn batch_identity_on_centroids() {
        let c = cb(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]);
        assert_eq!(assign_batch(&c, c.centroids()).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn assign_errors() {
        let c = cb(&[&[0.0, 0.0]]);
        assert!(matches!(assign(&c, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(assign(&c, &[1.0, f32::NAN]), Err(Error::NonFinite(_))));
        let m = Matrix::from_vec(1, 3, vec![0.0f32; 3]).unwrap();
        assert!(matches!(assign_batch(&c, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicate_centroids_resolve_to_lowest() {
        let c = cb(&[&[3.0], &[1.0], &[1.0]]);
        assert_eq!(assign(&c, &[1.2]).unwrap(), 1);
        assert_eq!(assign_batch(&c, &Matrix::from_vec(1, 1, vec![1.2]).unwrap()).unwrap(), vec![1]);
    }
}
