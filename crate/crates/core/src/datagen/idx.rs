//! MNIST IDX files (big-endian, uncompressed).

use std::path::Path;

use super::ImageDataset;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const MNIST_CLASSES: usize = 10;

fn read_u32(bytes: &[u8], offset: usize, field: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(field, format!("truncated: header needs {} bytes, file has {}", offset + 4, bytes.len())))
}

fn check_magic(bytes: &[u8], expected: u32, field: &str) -> Result<()> {
    let magic = read_u32(bytes, 0, field)?;
    if magic != expected {
        return Err(Error::parse(field, format!("bad magic {magic}, expected {expected}")));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, payload: usize, field: &str) -> Result<()> {
    let want = header + payload;
    match bytes.len() {
        len if len < want => Err(Error::parse(field, format!("truncated: expected {want} bytes, found {len}"))),
        len if len > want => Err(Error::parse(field, format!("{} trailing bytes after {want}-byte payload", len - want))),
        _ => Ok(()),
    }
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, "images magic")?;
    let n = read_u32(bytes, 4, "images count")? as usize;
    let rows = read_u32(bytes, 8, "images rows")? as usize;
    let cols = read_u32(bytes, 12, "images cols")? as usize;
    let payload = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::parse("images header", "dimension product overflows"))?;
    check_payload(bytes, 16, payload, "images payload")?;
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, "labels magic")?;
    let n = read_u32(bytes, 4, "labels count")? as usize;
    check_payload(bytes, 8, n, "labels payload")?;
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= MNIST_CLASSES) {
        return Err(Error::parse("labels payload", format!("label {bad} outside [0, {MNIST_CLASSES})")));
    }
    Ok(labels)
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (n, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != n {
        return Err(Error::parse(
            "labels count",
            format!("count mismatch: {n} images but {} labels", labels.len()),
        ));
    }
    ImageDataset::new(pixels, labels, MNIST_CLASSES, rows, cols, 1)
}

pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
