use serde::{Deserialize, Serialize};

use super::{NetError, NetworkParams, Result};

/// Optional per-sample augmentation applied to training batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    None,
    /// Reverse the feature vector with probability 1/2.
    Flip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub total_epochs: u32,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Fractions of `total_epochs` at which the learning rate drops.
    pub drop_epochs: Vec<f64>,
    pub drop_factor: f64,
    pub momentum: f64,
    pub checkpoint_every: u32,
    pub seed: u64,
    #[serde(default)]
    pub augmentation: Augmentation,
}

impl TrainSchedule {
    /// 200 epochs, lr 0.1 dropped 10x at epochs 100 and 150, batch 128,
    /// checkpoint every 10 epochs.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            total_epochs: 200,
            batch_size: 128,
            base_lr: 0.1,
            drop_epochs: vec![0.5, 0.75],
            drop_factor: 10.0,
            momentum: 0.9,
            checkpoint_every: 10,
            seed,
            augmentation: Augmentation::None,
        }
    }

    /// Same shape at 60 epochs with a checkpoint every 3 epochs.
    pub fn desk_default(seed: u64) -> Self {
        Self {
            total_epochs: 60,
            checkpoint_every: 3,
            ..Self::full_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetError::InvalidSchedule(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr must be > 0, got {}", self.base_lr));
        }
        if !(self.drop_factor.is_finite() && self.drop_factor > 0.0) {
            return bad(format!("drop_factor must be > 0, got {}", self.drop_factor));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1".into());
        }
        let mut prev = 0.0;
        for &d in &self.drop_epochs {
            if !(d > prev && d < 1.0) {
                return bad(format!(
                    "drop_epochs must be strictly increasing in (0, 1), got {:?}",
                    self.drop_epochs
                ));
            }
            prev = d;
        }
        Ok(())
    }
}

/// Learning rate for a 0-based epoch: `base_lr` divided by `drop_factor` once
/// for every drop point already reached.
pub fn lr_at_epoch(schedule: &TrainSchedule, epoch: u32) -> Result<f64> {
    if epoch >= schedule.total_epochs {
        return Err(NetError::InvalidSchedule(format!(
            "epoch {epoch} out of range for {} epochs",
            schedule.total_epochs
        )));
    }
    let total = f64::from(schedule.total_epochs);
    let passed = schedule
        .drop_epochs
        .iter()
        .filter(|&&frac| f64::from(epoch) >= frac * total)
        .count();
    Ok(schedule.base_lr / schedule.drop_factor.powi(passed as i32))
}

/// `v <- momentum * v + g; p <- p - lr * v`, elementwise.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(NetError::Shape(format!(
            "sgd step: params {}, grads {}, velocity {}",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

impl NetworkParams {
    pub fn sgd_momentum_step(
        &mut self,
        grads: &NetworkParams,
        velocity: &mut NetworkParams,
        lr: f64,
        momentum: f64,
    ) -> Result<()> {
        if !self.same_shape(grads) || !self.same_shape(velocity) {
            return Err(NetError::Shape("sgd step: parameter shapes differ".into()));
        }
        for ((p, g), v) in self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(velocity.layers.iter_mut())
        {
            sgd_momentum_step(&mut p.weights, &g.weights, &mut v.weights, lr, momentum)?;
            sgd_momentum_step(&mut p.bias, &g.bias, &mut v.bias, lr, momentum)?;
        }
        Ok(())
    }
}
