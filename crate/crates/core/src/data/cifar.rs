//! CIFAR-10 binary-version reader and writer.
//!
//! Each record is `1 + 3072` bytes: a label in `0..=9` followed by the 32x32
//! image as three channel planes (1024 red, 1024 green, 1024 blue bytes, each
//! plane row-major). A stock file holds 10000 records; this reader accepts any
//! whole number of records so synthetic batches can be smaller.
//!
//! <https://www.cs.toronto.edu/~kriz/cifar.html>

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const WIDTH: usize = 32;
pub const HEIGHT: usize = 32;
pub const CHANNELS: usize = 3;
pub const IMAGE_BYTES: usize = WIDTH * HEIGHT * CHANNELS;
pub const RECORD_BYTES: usize = 1 + IMAGE_BYTES;
pub const NUM_CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Reads one batch file into `[n, 3, 32, 32]` floats in `[0, 1]` plus labels.
pub fn read_batch(path: &Path) -> Result<(Vec<f32>, Vec<u8>)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    decode_records(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Decodes raw record bytes; exposed separately so tests can hit the parser
/// without touching the filesystem.
pub fn decode_records(bytes: &[u8]) -> Result<(Vec<f32>, Vec<u8>)> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Format(format!(
            "file length {} is not a multiple of the {RECORD_BYTES}-byte record size",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut images = Vec::with_capacity(n * IMAGE_BYTES);
    let mut labels = Vec::with_capacity(n);
    for record in bytes.chunks_exact(RECORD_BYTES) {
        let label = record[0];
        if label as usize >= NUM_CLASSES {
            return Err(Error::Format(format!(
                "label byte {label} out of range 0..{NUM_CLASSES}"
            )));
        }
        labels.push(label);
        images.extend(record[1..].iter().map(|&b| b as f32 / 255.0));
    }
    Ok((images, labels))
}

/// Concatenates batch files into one dataset, preserving file and record order.
pub fn load_files(paths: &[&Path]) -> Result<Dataset> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let (im, la) = read_batch(path)?;
        images.extend(im);
        labels.extend(la);
    }
    let n = labels.len();
    Dataset::new(
        Tensor::new(vec![n, CHANNELS, HEIGHT, WIDTH], images)?,
        labels,
        NUM_CLASSES,
    )
}

/// Loads the conventional directory layout: five training batches plus
/// `test_batch.bin`. Returns `(train, test)`.
pub fn load_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train_paths: Vec<_> = TRAIN_FILES.iter().map(|f| dir.join(f)).collect();
    let train_refs: Vec<&Path> = train_paths.iter().map(|p| p.as_path()).collect();
    let train = load_files(&train_refs)?;
    let test = load_files(&[dir.join(TEST_FILE).as_path()])?;
    Ok((train, test))
}

/// Writes records in the batch format. `pixels` is `[n, 3, 32, 32]` u8 in the
/// same channel-planar order the format uses.
pub fn write_batch(path: &Path, pixels: &[u8], labels: &[u8]) -> Result<()> {
    if pixels.len() != labels.len() * IMAGE_BYTES {
        return Err(Error::Shape(format!(
            "{} labels need {} pixel bytes, got {}",
            labels.len(),
            labels.len() * IMAGE_BYTES,
            pixels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }
    let mut bytes = Vec::with_capacity(labels.len() * RECORD_BYTES);
    for (label, image) in labels.iter().zip(pixels.chunks_exact(IMAGE_BYTES)) {
        bytes.push(*label);
        bytes.extend_from_slice(image);
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Quantizes a `[0, 1]` float image set back to bytes (round to nearest).
pub fn to_bytes(images: &[f32]) -> Vec<u8> {
    images
        .iter()
        .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}
