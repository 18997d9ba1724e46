//! Binary container formats. All integers and floats are little-endian; every file
//! ends with a CRC-32 (IEEE) of all preceding bytes.
//!
//! Codebook (`SVCB`, version 1):
//!
//! | field          | type   |
//! |----------------|--------|
//! | magic          | `SVCB` |
//! | version        | u16    |
//! | tier tag       | u8     |
//! | k              | u32    |
//! | dim            | u32    |
//! | seed           | u64    |
//! | iterations run | u32    |
//! | final inertia  | f64    |
//! | centroids      | k*dim f32, row-major |
//! | crc32          | u32    |
//!
//! Feature matrix (`FMAT`, version 1): magic, u16 version, u32 frames, u32 dim,
//! f64 frame hop, frames*dim f32 row-major, crc32.

use crate::error::{Error, Result};
use crate::model::{Codebook, FeatureMatrix, Matrix, Tier, TrainingMeta};
use crate::scalar::Scalar;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"SVCB";
pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const FORMAT_VERSION: u16 = 1;

/// Bytes before the centroid block of a codebook file.
pub const CODEBOOK_HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4 + 8 + 4 + 8;
/// Bytes before the data block of a feature file.
pub const FMAT_HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;
pub const CHECKSUM_LEN: usize = 4;

fn finish(mut buf: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn push_values<S: Scalar>(buf: &mut Vec<u8>, values: &[S]) {
    for v in values {
        buf.extend_from_slice(&v.as_f32().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Check magic, length, checksum and version, returning a reader past the version.
fn open<'a>(bytes: &'a [u8], magic: &'static [u8; 4], header_len: usize) -> Result<Reader<'a>> {
    let name = std::str::from_utf8(magic).unwrap();
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            needed: 4,
            available: bytes.len(),
        });
    }
    if &bytes[..4] != magic {
        return Err(Error::BadMagic { expected: name });
    }
    if bytes.len() < header_len + CHECKSUM_LEN {
        return Err(Error::TruncatedFile {
            needed: header_len + CHECKSUM_LEN,
            available: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    Ok(r)
}

fn read_values<S: Scalar>(r: &mut Reader<'_>, rows: usize, cols: usize) -> Result<Vec<S>> {
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::invalid("binary file", "shape overflows"))?;
    let remaining = r.bytes.len() - r.pos;
    if remaining != count * 4 {
        return Err(if remaining < count * 4 {
            Error::TruncatedFile {
                needed: r.pos + count * 4 + CHECKSUM_LEN,
                available: r.bytes.len() + CHECKSUM_LEN,
            }
        } else {
            Error::invalid("binary file", format!("{} trailing bytes", remaining - count * 4))
        });
    }
    let data = r.take(count * 4)?;
    Ok(data
        .chunks_exact(4)
        .map(|b| S::cast_f32(f32::from_le_bytes(b.try_into().unwrap())))
        .collect())
}

pub fn save_codebook<S: Scalar>(cb: &Codebook<S>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(CODEBOOK_HEADER_LEN + cb.k() * cb.dim() * 4 + CHECKSUM_LEN);
    buf.extend_from_slice(CODEBOOK_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(cb.tier().tag());
    buf.extend_from_slice(&(cb.k() as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.dim() as u32).to_le_bytes());
    let meta = cb.meta();
    buf.extend_from_slice(&meta.seed.to_le_bytes());
    buf.extend_from_slice(&meta.iterations_run.to_le_bytes());
    buf.extend_from_slice(&meta.final_inertia.to_le_bytes());
    push_values(&mut buf, cb.centroids().as_slice());
    finish(buf)
}

pub fn load_codebook<S: Scalar>(bytes: &[u8]) -> Result<Codebook<S>> {
    let mut r = open(bytes, CODEBOOK_MAGIC, CODEBOOK_HEADER_LEN)?;
    let tag = r.u8()?;
    let tier = Tier::from_tag(tag).ok_or_else(|| Error::invalid("codebook file", format!("unknown tier tag {tag}")))?;
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let meta = TrainingMeta {
        seed: r.u64()?,
        iterations_run: r.u32()?,
        final_inertia: r.f64()?,
    };
    let values = read_values(&mut r, k, dim)?;
    Codebook::new(tier, Matrix::from_vec(k, dim, values)?, meta)
}

pub fn write_fmat<S: Scalar>(features: &FeatureMatrix<S>) -> Vec<u8> {
    let (t, d) = (features.num_frames(), features.dim());
    let mut buf = Vec::with_capacity(FMAT_HEADER_LEN + t * d * 4 + CHECKSUM_LEN);
    buf.extend_from_slice(FMAT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&features.frame_hop().to_le_bytes());
    push_values(&mut buf, features.matrix().as_slice());
    finish(buf)
}

pub fn read_fmat<S: Scalar>(bytes: &[u8]) -> Result<FeatureMatrix<S>> {
    let mut r = open(bytes, FMAT_MAGIC, FMAT_HEADER_LEN)?;
    let t = r.u32()? as usize;
    let d = r.u32()? as usize;
    let hop = r.f64()?;
    let values = read_values(&mut r, t, d)?;
    FeatureMatrix::new(t, d, values, hop)
}

/// Header fields of either format, for inspection without loading the payload.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum Header {
    Codebook {
        version: u16,
        tier: Tier,
        k: u32,
        dim: u32,
        seed: u64,
        iterations_run: u32,
        final_inertia: f64,
        checksum_ok: bool,
        bytes: usize,
    },
    Fmat {
        version: u16,
        num_frames: u32,
        dim: u32,
        frame_hop: f64,
        checksum_ok: bool,
        bytes: usize,
    },
}

pub fn read_header(bytes: &[u8]) -> Result<Header> {
    let checksum_ok = bytes.len() >= CHECKSUM_LEN && {
        let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        crc32fast::hash(body) == u32::from_le_bytes(trailer.try_into().unwrap())
    };
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    let version = r.u16()?;
    if magic == CODEBOOK_MAGIC {
        let tag = r.u8()?;
        Ok(Header::Codebook {
            version,
            tier: Tier::from_tag(tag).ok_or_else(|| Error::invalid("codebook file", format!("unknown tier tag {tag}")))?,
            k: r.u32()?,
            dim: r.u32()?,
            seed: r.u64()?,
            iterations_run: r.u32()?,
            final_inertia: r.f64()?,
            checksum_ok,
            bytes: bytes.len(),
        })
    } else if magic == FMAT_MAGIC {
        Ok(Header::Fmat {
            version,
            num_frames: r.u32()?,
            dim: r.u32()?,
            frame_hop: r.f64()?,
            checksum_ok,
            bytes: bytes.len(),
        })
    } else {
        Err(Error::BadMagic { expected: "SVCB or FMAT" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_codebook() -> Codebook<f32> {
        Codebook::new(
            Tier::Phone,
            Matrix::from_vec(2, 3, vec![0.5, -1.25, 3.0, 1e-7, -0.0, 42.0]).unwrap(),
            TrainingMeta {
                seed: 0xDEAD_BEEF,
                iterations_run: 17,
                final_inertia: 12.375,
            },
        )
        .unwrap()
    }

    #[test]
    fn codebook_round_trip() {
        let cb = small_codebook();
        let bytes = save_codebook(&cb);
        assert_eq!(bytes.len(), CODEBOOK_HEADER_LEN + 2 * 3 * 4 + CHECKSUM_LEN);
        let back: Codebook<f32> = load_codebook(&bytes).unwrap();
        assert_eq!(back, cb);
        let bits = |c: &Codebook<f32>| c.centroids().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&cb));
    }

    #[test]
    fn codebook_corruption() {
        let bytes = save_codebook(&small_codebook());
        let mut bad = bytes.clone();
        bad[CODEBOOK_HEADER_LEN + 5] ^= 0x01;
        assert!(matches!(load_codebook::<f32>(&bad), Err(Error::ChecksumMismatch { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load_codebook::<f32>(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            load_codebook::<f32>(&bytes[..bytes.len() - 6]),
            Err(Error::ChecksumMismatch { .. })
        ));
        assert!(matches!(load_codebook::<f32>(&bytes[..10]), Err(Error::TruncatedFile { .. })));
    }

    #[test]
    fn version_and_shape_checked_after_crc() {
        let mut bytes = save_codebook(&small_codebook());
        bytes.truncate(bytes.len() - CHECKSUM_LEN);
        bytes[4] = 2;
        let bytes = finish(bytes);
        assert!(matches!(load_codebook::<f32>(&bytes), Err(Error::VersionUnsupported(2))));

        let mut bytes = save_codebook(&small_codebook());
        bytes.truncate(bytes.len() - CHECKSUM_LEN - 4);
        let bytes = finish(bytes);
        assert!(matches!(load_codebook::<f32>(&bytes), Err(Error::TruncatedFile { .. })));
    }

    #[test]
    fn fmat_round_trip_and_header() {
        let f = FeatureMatrix::new(3, 2, vec![1.0f32, 2.0, 3.0, 4.0, 5.5, -6.0], 0.02).unwrap();
        let bytes = write_fmat(&f);
        assert_eq!(bytes.len(), FMAT_HEADER_LEN + 24 + CHECKSUM_LEN);
        assert_eq!(read_fmat::<f32>(&bytes).unwrap(), f);
        match read_header(&bytes).unwrap() {
            Header::Fmat { num_frames, dim, frame_hop, checksum_ok, .. } => {
                assert_eq!((num_frames, dim, frame_hop, checksum_ok), (3, 2, 0.02, true));
            }
            h => panic!("{h:?}"),
        }
        let mut bad = bytes.clone();
        bad[FMAT_HEADER_LEN] ^= 0x80;
        assert!(matches!(read_fmat::<f32>(&bad), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn f64_storage_is_f32() {
        let f = FeatureMatrix::new(1, 1, vec![0.1f64], 0.02).unwrap();
        let back: FeatureMatrix<f64> = read_fmat(&write_fmat(&f)).unwrap();
        assert_eq!(back.frame(0)[0], 0.1f32 as f64);
    }
}
