use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"), try_from = "MatrixRepr<S>")]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
struct MatrixRepr<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> TryFrom<MatrixRepr<S>> for Matrix<S> {
    type Error = Error;

    fn try_from(r: MatrixRepr<S>) -> Result<Self> {
        Matrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl<S: Scalar> Matrix<S> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::invalid(
                "matrix",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Build from equally sized rows. An empty iterator yields a `0 x cols` matrix.
    pub fn from_rows<R: AsRef<[S]>>(cols: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Matrix { rows: n, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[S]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        (0..self.rows).map(move |i| &self.data[i * cols..i * cols + self.cols])
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Append the rows of `other`. Panics on column mismatch.
    pub fn extend_rows(&mut self, other: &Matrix<S>) {
        assert_eq!(self.cols, other.cols, "column count mismatch");
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
    }

    pub fn push_row(&mut self, row: &[S]) {
        assert_eq!(self.cols, row.len(), "column count mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Convert every element to another precision.
    pub fn cast<T: Scalar>(&self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::cast_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Matrix::<f32>::from_vec(2, 2, vec![1.0; 3]).is_err());
        let m = Matrix::from_rows(2, [[1.0f32, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert!(Matrix::<f32>::from_rows(2, [vec![1.0]]).is_err());
        let empty = Matrix::<f32>::from_rows(3, Vec::<Vec<f32>>::new()).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 3));
        assert_eq!(empty.iter_rows().count(), 0);
    }

    #[test]
    fn serde_rejects_bad_shape() {
        let bad = r#"{"rows":2,"cols":2,"data":[1.0]}"#;
        assert!(serde_json::from_str::<Matrix<f32>>(bad).is_err());
    }
}
