use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;
const CIFAR_PIXELS: usize = 3072;
const CIFAR_RECORD: usize = CIFAR_PIXELS + 1;

/// Reads a file, inflating it first when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: (at + 4) as u64,
            found: bytes.len() as u64,
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Loads an IDX image/label pair (optionally gzip-compressed), scaling
/// pixels to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let img = read_maybe_gz(ip)?;
    let lab = read_maybe_gz(lp)?;

    check_magic(&img, IDX_IMAGES, ip)?;
    let n = be_u32(&img, 4, ip)? as usize;
    let rows = be_u32(&img, 8, ip)? as usize;
    let cols = be_u32(&img, 12, ip)? as usize;
    let d = rows * cols;
    check_len(&img, 16 + n * d, ip)?;

    check_magic(&lab, IDX_LABELS, lp)?;
    let m = be_u32(&lab, 4, lp)? as usize;
    check_len(&lab, 8 + m, lp)?;
    if m != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: m,
        });
    }

    let pixels = img[16..16 + n * d].iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<f64> = lab[8..8 + n].iter().map(|&b| b as f64).collect();
    let name = ip
        .file_name()
        .map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, DenseMatrix::from_vec(n, d, pixels)?, labels.into(), None)
}

/// Loads and concatenates CIFAR-10 binary batch files.
pub fn load_cifar10<P: AsRef<Path>>(bin_paths: &[P]) -> Result<Dataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in bin_paths {
        let p = p.as_ref();
        let bytes = fs::read(p)?;
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::RecordSize {
                path: p.to_path_buf(),
                len: bytes.len() as u64,
                record: CIFAR_RECORD,
            });
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(rec[0] as f64);
            pixels.extend(rec[1..].iter().map(|&b| b as f64 / 255.0));
        }
    }
    let n = labels.len();
    Dataset::new(
        "cifar10",
        DenseMatrix::from_vec(n, CIFAR_PIXELS, pixels)?,
        labels.into(),
        None,
    )
}
