//! Floating-point element type shared by every numeric container in the crate.
//!
//! Storage is usually `f32` (see [`crate::FeatureMatrix32`]) but all of the math is
//! written against [`Scalar`], so the same code runs in `f64` when a caller needs
//! the extra headroom (the finite-difference gradient check does).
//! Accumulations that sum over many rows (pooling, inertia, centroid updates) are
//! always carried out in `f64` regardless of `S`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Name used in diagnostics.
    const NAME: &'static str;

    /// Round an `f64` accumulator back into storage precision.
    fn cast_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Storage conversion used by the binary file formats, which are always f32.
    fn cast_f32(v: f32) -> Self;

    fn as_f32(self) -> f32;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn cast_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn cast_f32(v: f32) -> Self {
        v
    }
    #[inline]
    fn as_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn cast_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn cast_f32(v: f32) -> Self {
        v as f64
    }
    #[inline]
    fn as_f32(self) -> f32 {
        self as f32
    }
}

/// Squared Euclidean distance accumulated in f64.
#[inline]
pub fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum()
}

#[inline]
pub fn squared_norm<S: Scalar>(a: &[S]) -> f64 {
    a.iter()
        .map(|&x| {
            let v = x.as_f64();
            v * v
        })
        .sum()
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x.as_f64() * y.as_f64())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_agree_across_precisions() {
        let a32 = [1.0f32, 2.0, -3.0];
        let b32 = [0.5f32, 2.5, 1.0];
        let a64 = a32.map(f64::from);
        let b64 = b32.map(f64::from);
        assert_eq!(squared_distance(&a32, &b32), squared_distance(&a64, &b64));
        assert_eq!(squared_distance(&a32, &b32), 0.25 + 0.25 + 16.0);
        assert_eq!(squared_norm(&a32), 14.0);
        assert_eq!(dot(&a32, &b32), 0.5 + 5.0 - 3.0);
    }
}
