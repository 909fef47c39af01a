use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax::{argmax, softmax_stable};
use super::{NetError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
        seed: u64,
    },
    Relu {
        dim: usize,
    },
}

/// Layer list for a dense/ReLU network.
///
/// Layers must alternate `Dense, Relu, Dense, ..., Dense`: the checkpoint file
/// stores only dense layers and implies a ReLU between each consecutive pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NetError::InvalidSpec("no layers".into()));
        }
        let mut width: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            let expect_dense = i % 2 == 0;
            match (*layer, expect_dense) {
                (LayerSpec::Dense { in_dim, out_dim, .. }, true) => {
                    if in_dim == 0 || out_dim == 0 {
                        return Err(NetError::InvalidSpec(format!(
                            "layer {i}: dims must be positive"
                        )));
                    }
                    if let Some(w) = width {
                        if w != in_dim {
                            return Err(NetError::InvalidSpec(format!(
                                "layer {i}: in_dim {in_dim} does not chain with width {w}"
                            )));
                        }
                    }
                    width = Some(out_dim);
                }
                (LayerSpec::Relu { dim }, false) => {
                    if Some(dim) != width {
                        return Err(NetError::InvalidSpec(format!(
                            "layer {i}: relu dim {dim} does not chain with width {width:?}"
                        )));
                    }
                }
                _ => {
                    return Err(NetError::InvalidSpec(format!(
                        "layer {i}: layers must alternate dense and relu, starting with dense"
                    )))
                }
            }
        }
        if !matches!(layers.last(), Some(LayerSpec::Dense { .. })) {
            return Err(NetError::InvalidSpec("final layer must be dense".into()));
        }
        Ok(Self { layers })
    }

    /// `input -> hidden[0] -> relu -> ... -> classes`, one init seed per dense
    /// layer derived from `seed`.
    pub fn mlp(input_dim: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let mut layers = Vec::new();
        for (i, pair) in dims.windows(2).enumerate() {
            if i > 0 {
                layers.push(LayerSpec::Relu { dim: pair[0] });
            }
            layers.push(LayerSpec::Dense {
                in_dim: pair[0],
                out_dim: pair[1],
                seed: seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            });
        }
        Self::new(layers)
    }

    /// `in -> 128 -> relu -> 64 -> relu -> classes`.
    pub fn desk_default(input_dim: usize, classes: usize, seed: u64) -> Result<Self> {
        Self::mlp(input_dim, &[128, 64], classes, seed)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        match self.layers[0] {
            LayerSpec::Dense { in_dim, .. } => in_dim,
            LayerSpec::Relu { dim } => dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.layers[self.layers.len() - 1] {
            LayerSpec::Dense { out_dim, .. } => out_dim,
            LayerSpec::Relu { dim } => dim,
        }
    }

    /// Glorot-uniform weights from each layer's seed, zero biases.
    pub fn init_params(&self) -> NetworkParams {
        let layers = self
            .layers
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Dense {
                    in_dim,
                    out_dim,
                    seed,
                } => {
                    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
                    let dist = Uniform::new(-limit, limit);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let weights = (0..in_dim * out_dim).map(|_| dist.sample(&mut rng)).collect();
                    Some(DenseParams {
                        rows: in_dim,
                        cols: out_dim,
                        weights,
                        bias: vec![0.0; out_dim],
                    })
                }
                LayerSpec::Relu { .. } => None,
            })
            .collect();
        NetworkParams { layers }
    }
}

/// One dense layer computing `y = x W + b`.
///
/// `weights` is row-major with `rows = in_dim`, `cols = out_dim`, so
/// `weights[i * cols + j]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; cols],
        }
    }

    fn forward_into(&self, input: &[f64], batch: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(batch * self.cols);
        for r in 0..batch {
            let x = &input[r * self.rows..(r + 1) * self.rows];
            let start = out.len();
            out.extend_from_slice(&self.bias);
            let y = &mut out[start..];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &self.weights[i * self.cols..(i + 1) * self.cols];
                for (yj, &wij) in y.iter_mut().zip(w) {
                    *yj += xi * wij;
                }
            }
        }
    }
}

/// Parameters of a dense network; a ReLU sits between consecutive layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<DenseParams>,
}

impl NetworkParams {
    pub fn new(layers: Vec<DenseParams>) -> Result<Self> {
        let params = Self { layers };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(NetError::InvalidSpec("no dense layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.rows == 0 || l.cols == 0 {
                return Err(NetError::Shape(format!("layer {i}: zero dimension")));
            }
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.cols {
                return Err(NetError::Shape(format!(
                    "layer {i}: buffers do not match {}x{}",
                    l.rows, l.cols
                )));
            }
            if i > 0 && self.layers[i - 1].cols != l.rows {
                return Err(NetError::Shape(format!(
                    "layer {i}: rows {} do not chain with previous cols {}",
                    l.rows,
                    self.layers[i - 1].cols
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(NetError::Numeric(format!("layer {i}: non-finite parameter")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].cols
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseParams::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.rows == b.rows && a.cols == b.cols)
    }

    pub(crate) fn trace(&self, input: &[f64], batch: usize) -> Result<Trace> {
        let in_dim = self.input_dim();
        if input.len() != batch * in_dim {
            return Err(NetError::Shape(format!(
                "batch of {batch} needs {} values for input dim {in_dim}, got {}",
                batch * in_dim,
                input.len()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward_into(&current, batch, &mut out);
            if l < last {
                for v in &mut out {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            inputs.push(current);
            current = out;
        }
        if current.iter().any(|v| !v.is_finite()) {
            return Err(NetError::Numeric("non-finite logits".into()));
        }
        Ok(Trace {
            batch,
            inputs,
            logits: current,
        })
    }

    /// Backpropagates `dlogits` (batch x classes). Parameter gradients are
    /// accumulated into `grads` when given; the input gradient is returned.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        dlogits: Vec<f64>,
        mut grads: Option<&mut NetworkParams>,
    ) -> Vec<f64> {
        let batch = trace.batch;
        let mut delta = dlogits;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            if let Some(g) = grads.as_deref_mut() {
                let g = &mut g.layers[l];
                for r in 0..batch {
                    let d = &delta[r * layer.cols..(r + 1) * layer.cols];
                    for (gb, &dj) in g.bias.iter_mut().zip(d) {
                        *gb += dj;
                    }
                    let x = &input[r * layer.rows..(r + 1) * layer.rows];
                    for (i, &xi) in x.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let gw = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                        for (gij, &dj) in gw.iter_mut().zip(d) {
                            *gij += xi * dj;
                        }
                    }
                }
            }
            let mut dinput = vec![0.0; batch * layer.rows];
            for r in 0..batch {
                let d = &delta[r * layer.cols..(r + 1) * layer.cols];
                for i in 0..layer.rows {
                    let w = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                    let mut acc = 0.0;
                    for (&wij, &dj) in w.iter().zip(d) {
                        acc += wij * dj;
                    }
                    // ReLU mask: the stored input is relu(z), positive iff z > 0.
                    if l > 0 && input[r * layer.rows + i] <= 0.0 {
                        acc = 0.0;
                    }
                    dinput[r * layer.rows + i] = acc;
                }
            }
            delta = dinput;
        }
        delta
    }

    /// Logits for one sample.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x, 1)?.logits)
    }

    /// Logits and penultimate activations for one sample.
    pub fn activations(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut trace = self.trace(x, 1)?;
        let penultimate = trace.inputs.pop().unwrap_or_default();
        Ok((trace.logits, penultimate))
    }

    /// Gradient w.r.t. `x` of `-log max_j softmax(logits / T)_j`.
    pub fn input_gradient(&self, x: &[f64], temperature: f64) -> Result<Vec<f64>> {
        let trace = self.trace(x, 1)?;
        let probs = softmax_stable(&trace.logits, temperature)?;
        let top = argmax(&probs).expect("non-empty logits");
        let dlogits = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - if i == top { 1.0 } else { 0.0 }) / temperature)
            .collect();
        let grad = self.backward(&trace, dlogits, None);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NetError::Numeric("non-finite input gradient".into()));
        }
        Ok(grad)
    }

    /// Predicted class for each row of a flat batch.
    pub(crate) fn predict_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<usize>> {
        const CHUNK: usize = 256;
        let n = self.num_classes();
        let mut preds = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(CHUNK) {
            let flat: Vec<f64> = chunk.iter().flatten().copied().collect();
            let trace = self.trace(&flat, chunk.len())?;
            preds.extend(
                trace
                    .logits
                    .chunks(n)
                    .map(|row| argmax(row).expect("non-empty logits")),
            );
        }
        Ok(preds)
    }
}

pub(crate) struct Trace {
    pub batch: usize,
    /// Input to each dense layer; the last entry is the penultimate activation.
    pub inputs: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// Batched forward pass: `batch` is `[B, in_dim]`; returns logits `[B, N]` and
/// the activations entering the final dense layer.
pub fn forward(params: &NetworkParams, batch: &Tensor) -> Result<(Tensor, Tensor)> {
    let b = batch.rows();
    if batch.row_len() != params.input_dim() {
        return Err(NetError::Shape(format!(
            "input width {} does not match network input dim {}",
            batch.row_len(),
            params.input_dim()
        )));
    }
    let mut trace = params.trace(batch.data(), b)?;
    let penultimate = trace.inputs.pop().unwrap_or_default();
    let pen_dim = params.layers[params.layers.len() - 1].rows;
    Ok((
        Tensor::new(vec![b, params.num_classes()], trace.logits)?,
        Tensor::new(vec![b, pen_dim], penultimate)?,
    ))
}

/// Input-space gradient for a single sample (shape `[d]` or `[1, d]`); the
/// result has the same shape as `x`.
pub fn input_gradient(params: &NetworkParams, x: &Tensor, temperature: f64) -> Result<Tensor> {
    if x.rows() != 1 {
        return Err(NetError::Shape(format!(
            "input_gradient takes one sample, got {} rows",
            x.rows()
        )));
    }
    let grad = params.input_gradient(x.data(), temperature)?;
    Tensor::new(x.shape().to_vec(), grad)
}
