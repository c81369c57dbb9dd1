//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 1024 red, 1024 green and 1024 blue values (row-major 32x32 planes).

use std::path::Path;

use super::ImageDataset;
use crate::{Error, Result};

pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * 32 * 32;
const CIFAR_CLASSES: usize = 10;

pub fn parse_cifar10_binary(bytes: &[u8], source: &str) -> Result<(Vec<u8>, Vec<u8>)> {
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(Error::parse(
            source,
            format!(
                "size {} is not a multiple of the {CIFAR_RECORD_BYTES}-byte record (truncated or corrupt)",
                bytes.len()
            ),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD_BYTES;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_BYTES - 1));
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        if record[0] as usize >= CIFAR_CLASSES {
            return Err(Error::parse(source, format!("record {i}: label {} outside [0, 10)", record[0])));
        }
        labels.push(record[0]);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok((labels, pixels))
}

/// Loads and concatenates batch files in the given order.
pub fn load_cifar10_binary<P: AsRef<Path>>(paths: &[P]) -> Result<ImageDataset> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (l, p) = parse_cifar10_binary(&bytes, &path.display().to_string())?;
        labels.extend(l);
        pixels.extend(p);
    }
    ImageDataset::new(pixels, labels, CIFAR_CLASSES, 32, 32, 3)
}

/// Inverse of [`parse_cifar10_binary`] for 32x32x3 planar images.
pub fn encode_cifar10_binary(ds: &ImageDataset) -> Result<Vec<u8>> {
    if (ds.height, ds.width, ds.channels) != (32, 32, 3) {
        return Err(Error::Shape(format!(
            "CIFAR records hold 32x32x3 images, got {}x{}x{}",
            ds.height, ds.width, ds.channels
        )));
    }
    let mut out = Vec::with_capacity(ds.n() * CIFAR_RECORD_BYTES);
    for i in 0..ds.n() {
        out.push(ds.labels[i]);
        out.extend_from_slice(ds.image(i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_records() -> Vec<u8> {
        let mut bytes = vec![0u8; 2 * CIFAR_RECORD_BYTES];
        bytes[0] = 3;
        bytes[1] = 200; // red (0,0)
        bytes[1 + 1024] = 100; // green (0,0)
        bytes[CIFAR_RECORD_BYTES] = 9;
        bytes
    }

    #[test]
    fn parses_records_in_order() {
        let (labels, pixels) = parse_cifar10_binary(&two_records(), "mem").unwrap();
        assert_eq!(labels, vec![3, 9]);
        assert_eq!(pixels.len(), 2 * 3072);
        assert_eq!(pixels[0], 200);
        assert_eq!(pixels[1024], 100);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let (labels, pixels) = parse_cifar10_binary(&[], "mem").unwrap();
        assert!(labels.is_empty() && pixels.is_empty());
    }

    #[test]
    fn rejects_partial_records() {
        assert!(parse_cifar10_binary(&vec![0u8; 3074], "mem").is_err());
        let bytes = two_records();
        for cut in [1, 100, 3072, 3074, 6000, 6145] {
            assert!(parse_cifar10_binary(&bytes[..cut], "mem").is_err(), "cut {cut}");
        }
    }

    #[test]
    fn rejects_bad_label() {
        let mut bytes = two_records();
        bytes[0] = 10;
        assert!(parse_cifar10_binary(&bytes, "mem").is_err());
    }

    #[test]
    fn files_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        std::fs::write(&a, two_records()).unwrap();
        std::fs::write(&b, &two_records()[..CIFAR_RECORD_BYTES]).unwrap();
        let ds = load_cifar10_binary(&[&a, &b]).unwrap();
        assert_eq!(ds.labels, vec![3, 9, 3]);
        assert_eq!(encode_cifar10_binary(&ds).unwrap().len(), 3 * CIFAR_RECORD_BYTES);
    }
}
