//! IDX files as distributed with MNIST: big-endian `u32` magic
//! (`0x00000803` images, `0x00000801` labels), big-endian `u32` dimensions,
//! then unsigned bytes.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor2D;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated header (need {} bytes)", offset + 4),
        })
}

fn expect_magic(bytes: &[u8], magic: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        expect_magic(bytes, IMAGE_MAGIC)?;
        let count = be_u32(bytes, 4)? as usize;
        let rows = be_u32(bytes, 8)? as usize;
        let cols = be_u32(bytes, 12)? as usize;
        let want = count * rows * cols;
        let payload = &bytes[16..];
        if payload.len() < want {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("image payload truncated: {} of {want} bytes", payload.len()),
            });
        }
        if payload.len() > want {
            return Err(Error::Parse {
                offset: 16 + want,
                message: "trailing bytes after image payload".into(),
            });
        }
        Ok(Self {
            count,
            rows,
            cols,
            pixels: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [
            IMAGE_MAGIC,
            self.count as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

impl IdxLabels {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        expect_magic(bytes, LABEL_MAGIC)?;
        let count = be_u32(bytes, 4)? as usize;
        let payload = &bytes[8..];
        if payload.len() < count {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!(
                    "label payload truncated: {} of {count} bytes",
                    payload.len()
                ),
            });
        }
        if payload.len() > count {
            return Err(Error::Parse {
                offset: 8 + count,
                message: "trailing bytes after label payload".into(),
            });
        }
        Ok(Self {
            labels: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingPath {
            path: path.to_path_buf(),
        });
    }
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Build a dataset from parsed IDX contents, scaling pixels by 1/255.
pub fn dataset_from_idx(images: &IdxImages, labels: &IdxLabels) -> Result<LabeledDataset> {
    if images.count != labels.labels.len() {
        return Err(Error::Parse {
            offset: 4,
            message: format!("{} images but {} labels", images.count, labels.labels.len()),
        });
    }
    let dim = images.rows * images.cols;
    let data = images
        .pixels
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    let tensor = Tensor2D::new(images.count, dim, data)?;
    let labels: Vec<usize> = labels.labels.iter().map(|&l| usize::from(l)).collect();
    let arity = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(tensor, labels, arity)
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let images = IdxImages::parse(&read(images_path.as_ref())?)?;
    let labels = IdxLabels::parse(&read(labels_path.as_ref())?)?;
    dataset_from_idx(&images, &labels)
}

/// Quantize back to bytes (`round(v · 255)`) as `rows × cols` images.
pub fn encode_idx(ds: &LabeledDataset, rows: usize, cols: usize) -> Result<(IdxImages, IdxLabels)> {
    if rows * cols != ds.dim() {
        return Err(Error::shape(format!(
            "{rows}x{cols} images cannot hold {} values",
            ds.dim()
        )));
    }
    if let Some(&l) = ds.labels().iter().find(|&&l| l > 255) {
        return Err(Error::config(format!("label {l} does not fit in a byte")));
    }
    let pixels = ds
        .images()
        .data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    Ok((
        IdxImages {
            count: ds.len(),
            rows,
            cols,
            pixels,
        },
        IdxLabels {
            labels: ds.labels().iter().map(|&l| l as u8).collect(),
        },
    ))
}

pub fn write_idx(
    ds: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (images, labels) = encode_idx(ds, rows, cols)?;
    crate::pipeline::write_atomic(images_path.as_ref(), &images.to_bytes())?;
    crate::pipeline::write_atomic(labels_path.as_ref(), &labels.to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = vec![0, 0, 8, 3];
        for x in [count, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn label_byte_seven() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 2, 7, 0];
        assert_eq!(IdxLabels::parse(&bytes).unwrap().labels, vec![7, 0]);
    }

    #[test]
    fn header_only_is_empty() {
        let img = IdxImages::parse(&image_file(0, 28, 28, &[])).unwrap();
        let lab = IdxLabels::parse(&[0, 0, 8, 1, 0, 0, 0, 0]).unwrap();
        let ds = dataset_from_idx(&img, &lab).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.dim(), 784);
    }

    #[test]
    fn bad_magic_and_truncation_report_offsets() {
        let mut bytes = image_file(1, 2, 2, &[1, 2, 3, 4]);
        bytes[3] = 1;
        assert!(matches!(
            IdxImages::parse(&bytes),
            Err(Error::Parse { offset: 0, .. })
        ));
        let bytes = image_file(1, 2, 2, &[1, 2, 3]);
        assert!(matches!(
            IdxImages::parse(&bytes),
            Err(Error::Parse { offset: 19, .. })
        ));
        assert!(matches!(
            IdxLabels::parse(&[0, 0, 8]),
            Err(Error::Parse { offset: 3, .. })
        ));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let img = IdxImages::parse(&image_file(2, 1, 1, &[0, 255])).unwrap();
        let lab = IdxLabels::parse(&[0, 0, 8, 1, 0, 0, 0, 1, 3]).unwrap();
        assert!(matches!(
            dataset_from_idx(&img, &lab),
            Err(Error::Parse { offset: 4, .. })
        ));
    }
}
