//! IDX (MNIST) reader.
//!
//! Layout: big-endian `u32` magic (`0x00000803` for images, `0x00000801` for
//! labels), one big-endian `u32` per dimension, then unsigned bytes. Paths
//! ending in `.gz` are decompressed transparently.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, TargetData};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

/// Parses the header, returning the dimension sizes and the payload.
fn parse<'a>(path: &Path, bytes: &'a [u8], expected_magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let truncated = |detail: String| Error::Truncated {
        path: path.to_path_buf(),
        detail,
    };
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| truncated(format!("header ends before byte {}", at + 4)))
    };
    let magic = word(0)?;
    if magic != expected_magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: expected_magic,
        });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|d| word(4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let payload = &bytes[4 + 4 * ndims..];
    let expected: usize = dims.iter().product();
    if payload.len() < expected {
        return Err(truncated(format!(
            "expected {expected} data bytes, found {}",
            payload.len()
        )));
    }
    Ok((dims, &payload[..expected]))
}

/// Loads an image/label IDX pair. Pixels are divided by 255 and each image is
/// flattened row-major.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read_all(images_path)?;
    let label_bytes = read_all(labels_path)?;
    let (idims, pixels) = parse(images_path, &image_bytes, IMAGES_MAGIC)?;
    let (ldims, labels) = parse(labels_path, &label_bytes, LABELS_MAGIC)?;
    let (n_images, n_labels) = (idims[0], ldims[0]);
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let per_image = idims[1..].iter().product::<usize>();
    let features = Matrix::from_vec(
        n_images,
        per_image,
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    let labels: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(features, TargetData::Labels { labels, classes })
}
