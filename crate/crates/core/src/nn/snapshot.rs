//! Flat parameter snapshots and their wire encoding.
//!
//! Layout, all little-endian: `u64` layer count, then `(u64 out, u64 in)`
//! per layer, then every layer's weights (row-major) followed by its bias as
//! `f64`. Every field is 8 bytes wide.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    shapes: Vec<(usize, usize)>,
    values: Vec<f64>,
}

fn expected_len(shapes: &[(usize, usize)]) -> usize {
    shapes.iter().map(|&(o, i)| o * i + o).sum()
}

impl ParamSnapshot {
    pub fn new(shapes: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        let want = expected_len(&shapes);
        if values.len() != want {
            return Err(Error::shape(format!(
                "{} values for layer shapes needing {want}",
                values.len()
            )));
        }
        Ok(Self { shapes, values })
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Weights plus biases.
    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    /// Encoded size in 8-byte words (header included).
    pub fn wire_words(&self) -> usize {
        1 + 2 * self.shapes.len() + self.values.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.wire_words());
        out.extend_from_slice(&(self.shapes.len() as u64).to_le_bytes());
        for &(o, i) in &self.shapes {
            out.extend_from_slice(&(o as u64).to_le_bytes());
            out.extend_from_slice(&(i as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = WordReader { bytes, offset: 0 };
        let layers = cursor.u64()? as usize;
        if layers > bytes.len() / 16 {
            return Err(Error::Parse {
                offset: 0,
                message: format!("layer count {layers} exceeds payload"),
            });
        }
        let mut shapes = Vec::with_capacity(layers);
        for _ in 0..layers {
            let o = cursor.u64()? as usize;
            let i = cursor.u64()? as usize;
            shapes.push((o, i));
        }
        let n = expected_len(&shapes);
        let mut values = Vec::with_capacity(n.min(bytes.len() / 8));
        for _ in 0..n {
            values.push(f64::from_bits(cursor.u64()?));
        }
        if cursor.offset != bytes.len() {
            return Err(Error::Parse {
                offset: cursor.offset,
                message: "trailing bytes after snapshot".into(),
            });
        }
        Self::new(shapes, values)
    }
}

pub(crate) struct WordReader<'a> {
    pub bytes: &'a [u8],
    pub offset: usize,
}

impl WordReader<'_> {
    pub fn u64(&mut self) -> Result<u64> {
        let end = self.offset + 8;
        let chunk = self.bytes.get(self.offset..end).ok_or(Error::Parse {
            offset: self.offset,
            message: "truncated snapshot".into(),
        })?;
        self.offset = end;
        Ok(u64::from_le_bytes(chunk.try_into().expect("8 bytes")))
    }
}
