use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Blobs,
    ShiftedBlobs,
    GaussNoise,
}

/// Parameters for the synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub dim: usize,
    pub n_classes: usize,
    /// One mean per class (blob kinds only).
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Translation applied to every sample (shifted blobs only).
    pub shift: Vec<f64>,
    pub noise_mean: f64,
    pub noise_std: f64,
}

impl SyntheticSpec {
    /// Gaussian blobs with class `k` centred at `radius * e_k`, i.e. every
    /// mean lies `radius` from the origin.
    pub fn blobs(dim: usize, n_classes: usize, radius: f64, sigma: f64) -> Result<Self> {
        if n_classes == 0 || n_classes > dim {
            return Err(DataError::InvalidSpec(format!(
                "need 1 <= classes <= dim, got {n_classes} classes in dim {dim}"
            )));
        }
        let means = (0..n_classes)
            .map(|k| {
                let mut m = vec![0.0; dim];
                m[k] = radius;
                m
            })
            .collect();
        let spec = Self {
            kind: SyntheticKind::Blobs,
            dim,
            n_classes,
            means,
            sigma,
            shift: vec![0.0; dim],
            noise_mean: 0.5,
            noise_std: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The same blobs translated by `shift`.
    pub fn shifted(&self, shift: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: SyntheticKind::ShiftedBlobs,
            shift,
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }

    /// i.i.d. Gaussian noise, mean 0.5 and std 1 by default.
    pub fn noise(dim: usize, mean: f64, std: f64) -> Result<Self> {
        let spec = Self {
            kind: SyntheticKind::GaussNoise,
            dim,
            n_classes: 0,
            means: Vec::new(),
            sigma: 1.0,
            shift: Vec::new(),
            noise_mean: mean,
            noise_std: std,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::InvalidSpec(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        match self.kind {
            SyntheticKind::GaussNoise => {
                if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
                    return bad(format!("noise std must be > 0, got {}", self.noise_std));
                }
                if !self.noise_mean.is_finite() {
                    return bad("noise mean must be finite".into());
                }
            }
            SyntheticKind::Blobs | SyntheticKind::ShiftedBlobs => {
                if !(self.sigma.is_finite() && self.sigma > 0.0) {
                    return bad(format!("sigma must be > 0, got {}", self.sigma));
                }
                if self.n_classes == 0 || self.means.len() != self.n_classes {
                    return bad(format!(
                        "{} means for {} classes",
                        self.means.len(),
                        self.n_classes
                    ));
                }
                if self.means.iter().any(|m| m.len() != self.dim) {
                    return bad(format!("every mean must have dim {}", self.dim));
                }
                if self.kind == SyntheticKind::ShiftedBlobs && self.shift.len() != self.dim {
                    return bad(format!(
                        "shift has dim {}, blobs have dim {}",
                        self.shift.len(),
                        self.dim
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(DataError::InvalidSpec("sample count must be positive".into()));
    }
    Ok(())
}

/// `n` labeled samples; sample `i` belongs to class `i % n_classes`.
pub fn gen_blobs(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    check_count(n)?;
    if spec.kind == SyntheticKind::GaussNoise {
        return Err(DataError::InvalidSpec("gen_blobs needs a blob spec".into()));
    }
    let normal = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % spec.n_classes;
        let x = spec.means[class]
            .iter()
            .map(|&m| m + normal.sample(&mut rng))
            .collect();
        inputs.push(x);
        labels.push(class);
    }
    Ok(Dataset {
        inputs,
        labels: Some(labels),
    })
}

/// Blob samples translated by `spec.shift`, labels dropped.
pub fn gen_shifted(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    if spec.kind != SyntheticKind::ShiftedBlobs {
        return Err(DataError::InvalidSpec("gen_shifted needs a shifted-blob spec".into()));
    }
    let mut data = gen_blobs(spec, n, seed)?;
    for x in &mut data.inputs {
        for (v, s) in x.iter_mut().zip(&spec.shift) {
            *v += s;
        }
    }
    Ok(data.unlabeled())
}

/// `n` unlabeled vectors of i.i.d. `N(mean, std^2)` entries.
pub fn gen_noise(dim: usize, n: usize, mean: f64, std: f64, seed: u64) -> Result<Dataset> {
    SyntheticSpec::noise(dim, mean, std)?;
    check_count(n)?;
    let normal = Normal::new(mean, std).expect("std validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..n)
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    Ok(Dataset {
        inputs,
        labels: None,
    })
}
