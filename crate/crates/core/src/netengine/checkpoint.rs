//! Checkpoint file: little-endian `"OODC"`, version, epoch, dense layer
//! count, then per layer `rows, cols, weights[rows*cols], bias[cols]` as
//! `f64`, and finally train and test accuracy.

use std::path::Path;

use super::{DenseParams, NetError, NetworkParams, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OODC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u32,
    pub params: NetworkParams,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.params.layers.len() as u32).to_le_bytes());
        for layer in &self.params.layers {
            out.extend_from_slice(&(layer.rows as u32).to_le_bytes());
            out.extend_from_slice(&(layer.cols as u32).to_le_bytes());
            for v in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.train_accuracy.to_le_bytes());
        out.extend_from_slice(&self.test_accuracy.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(r.err(0, format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.err(4, format!("unsupported version {version}")));
        }
        let epoch = r.u32()?;
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let at = r.pos;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if rows == 0 || cols == 0 {
                return Err(r.err(at, "zero layer dimension".into()));
            }
            let weights = r.f64s(rows * cols)?;
            let bias = r.f64s(cols)?;
            layers.push(DenseParams {
                rows,
                cols,
                weights,
                bias,
            });
        }
        let train_accuracy = r.f64()?;
        let test_accuracy = r.f64()?;
        if r.pos != bytes.len() {
            return Err(r.err(r.pos, "trailing bytes".into()));
        }
        let params = NetworkParams { layers };
        params.validate().map_err(|e| r.err(12, e.to_string()))?;
        Ok(Self {
            epoch,
            params,
            train_accuracy,
            test_accuracy,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: String) -> NetError {
        NetError::Format { offset, message }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.err(self.pos, format!("truncated, need {n} more bytes")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).unwrap_or(usize::MAX))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
