//! IDX binaries (the MNIST distribution format): big-endian magic, big-endian
//! u32 dimension sizes, then unsigned bytes.

use std::path::Path;

use crate::error::{Error, Result};

const LABELS_MAGIC: u32 = 2049;
const IMAGES_MAGIC: u32 = 2051;

/// Images scaled from bytes to `[0, 1]`, stored row-major per image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl ImageSet {
    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Images(ImageSet),
    Labels(Vec<u8>),
}

pub fn read_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        LABELS_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let payload = payload(bytes, 8, count)?;
            Ok(IdxData::Labels(payload.to_vec()))
        }
        IMAGES_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            let total = count
                .checked_mul(rows)
                .and_then(|v| v.checked_mul(cols))
                .ok_or_else(|| Error::Idx("image dimensions overflow".into()))?;
            let payload = payload(bytes, 16, total)?;
            Ok(IdxData::Images(ImageSet {
                count,
                rows,
                cols,
                pixels: payload.iter().map(|&b| f64::from(b) / 255.0).collect(),
            }))
        }
        other => Err(Error::Idx(format!("unknown magic number {other}"))),
    }
}

pub fn read_idx_file(path: impl AsRef<Path>) -> Result<IdxData> {
    read_idx(&std::fs::read(path)?)
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx("truncated header".into()))
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let body = &bytes[start..];
    match body.len().cmp(&len) {
        std::cmp::Ordering::Less => {
            Err(Error::Idx(format!("truncated payload: header declares {len} bytes, found {}", body.len())))
        }
        std::cmp::Ordering::Greater => {
            Err(Error::Idx(format!("{} trailing bytes after declared payload", body.len() - len)))
        }
        std::cmp::Ordering::Equal => Ok(body),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn reads_labels() {
        let mut bytes = header(2049, &[3]);
        bytes.extend_from_slice(&[7, 2, 1]);
        assert_eq!(read_idx(&bytes).unwrap(), IdxData::Labels(vec![7, 2, 1]));
    }

    #[test]
    fn truncated_images_rejected() {
        let mut bytes = header(2051, &[2, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, 784));
        assert!(matches!(read_idx(&bytes), Err(Error::Idx(_))));
    }

    #[test]
    fn pixels_are_scaled() {
        let mut bytes = header(2051, &[1, 1, 2]);
        bytes.extend_from_slice(&[255, 0]);
        match read_idx(&bytes).unwrap() {
            IdxData::Images(set) => {
                assert_eq!((set.count, set.rows, set.cols), (1, 1, 2));
                assert_eq!(set.image(0), &[1.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_short_header() {
        assert!(read_idx(&header(1234, &[0])).is_err());
        assert!(read_idx(&[0, 0, 8]).is_err());
        let mut bytes = header(2049, &[1]);
        bytes.extend_from_slice(&[1, 2]);
        assert!(read_idx(&bytes).is_err());
    }
}
