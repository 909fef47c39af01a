use super::{NetError, Result};

/// Dense row-major `f64` tensor. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(NetError::Shape(format!(
                "shape dims must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(NetError::Shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NetError::Numeric(format!(
                "non-finite tensor value at index {i}"
            )));
        }
        Ok(Self { shape, data })
    }

    /// A `[rows.len(), dim]` batch from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(NetError::Shape(format!(
                "row {r} has length {}, expected {dim}",
                rows[r].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), dim], data)
    }

    /// A single-sample batch of shape `[1, len]`.
    pub fn row_vector(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![1, values.len()], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows when viewed as a matrix (leading dimension).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 1 {
            1
        } else {
            self.shape[0]
        }
    }

    /// Length of one row (product of trailing dimensions).
    pub fn row_len(&self) -> usize {
        self.data.len() / self.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[i * n..(i + 1) * n]
    }
}
