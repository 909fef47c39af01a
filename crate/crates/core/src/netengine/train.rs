use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::schedule::{lr_at_epoch, Augmentation};
use super::{Checkpoint, NetError, NetworkParams, NetworkSpec, Result, TrainSchedule};

/// Borrowed labeled dataset.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub inputs: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> Labeled<'a> {
    pub fn new(inputs: &'a [Vec<f64>], labels: &'a [usize]) -> Self {
        Self { inputs, labels }
    }

    fn check(&self, name: &str, dim: usize, classes: usize) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(NetError::EmptyDataset(name.to_string()));
        }
        if self.inputs.len() != self.labels.len() {
            return Err(NetError::Shape(format!(
                "{name}: {} inputs but {} labels",
                self.inputs.len(),
                self.labels.len()
            )));
        }
        if let Some(i) = self.inputs.iter().position(|x| x.len() != dim) {
            return Err(NetError::Shape(format!(
                "{name}: sample {i} has dim {}, network expects {dim}",
                self.inputs[i].len()
            )));
        }
        if let Some(i) = self.labels.iter().position(|&y| y >= classes) {
            return Err(NetError::Shape(format!(
                "{name}: label {} at sample {i} exceeds {classes} classes",
                self.labels[i]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    /// 1-based count of completed epochs.
    pub epoch: u32,
    pub lr: f64,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub periodic: Vec<Checkpoint>,
    /// Highest test accuracy over all epochs, earliest epoch on ties.
    pub best: Checkpoint,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    /// Periodic checkpoints in epoch order followed by the best model.
    pub fn checkpoints(&self) -> Vec<&Checkpoint> {
        self.periodic.iter().chain(std::iter::once(&self.best)).collect()
    }
}

fn accuracy(params: &NetworkParams, data: Labeled<'_>) -> Result<f64> {
    let preds = params.predict_all(data.inputs)?;
    let correct = preds.iter().zip(data.labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.labels.len() as f64)
}

/// Mean cross-entropy over a batch and its gradient w.r.t. the logits.
fn cross_entropy(logits: &[f64], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let batch = labels.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (r, &y) in labels.iter().enumerate() {
        let z = &logits[r * classes..(r + 1) * classes];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        loss += -(z[y] - max - log_sum);
        let g = &mut grad[r * classes..(r + 1) * classes];
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (z[j] - max - log_sum).exp();
            *gj = (p - if j == y { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    (loss / batch as f64, grad)
}

/// Mini-batch SGD with momentum on softmax cross-entropy.
///
/// The shuffling and augmentation stream is a single generator seeded from
/// `schedule.seed`, so a run is reproducible bit for bit.
pub fn train(
    spec: &NetworkSpec,
    train_set: Labeled<'_>,
    test_set: Labeled<'_>,
    schedule: &TrainSchedule,
) -> Result<TrainOutcome> {
    schedule.validate()?;
    if schedule.total_epochs == 0 {
        return Err(NetError::InvalidSchedule(
            "total_epochs is 0, no checkpoints produced".into(),
        ));
    }
    let dim = spec.input_dim();
    let classes = spec.num_classes();
    train_set.check("train set", dim, classes)?;
    test_set.check("test set", dim, classes)?;

    let mut params = spec.init_params();
    let mut velocity = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..train_set.inputs.len()).collect();

    let mut periodic = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let mut log = Vec::with_capacity(schedule.total_epochs as usize);

    for epoch in 0..schedule.total_epochs {
        let lr = lr_at_epoch(schedule, epoch)?;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(schedule.batch_size).enumerate() {
            let mut flat = Vec::with_capacity(idx.len() * dim);
            let mut labels = Vec::with_capacity(idx.len());
            for &i in idx {
                let x = &train_set.inputs[i];
                match schedule.augmentation {
                    Augmentation::Flip if rng.gen_bool(0.5) => flat.extend(x.iter().rev()),
                    _ => flat.extend_from_slice(x),
                }
                labels.push(train_set.labels[i]);
            }
            let trace = params.trace(&flat, idx.len()).map_err(|e| match e {
                NetError::Numeric(_) => NetError::NonFiniteLoss { epoch: epoch + 1, batch: b },
                other => other,
            })?;
            let (loss, dlogits) = cross_entropy(&trace.logits, &labels, classes);
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch: epoch + 1, batch: b });
            }
            loss_sum += loss * idx.len() as f64;
            let mut grads = params.zeros_like();
            params.backward(&trace, dlogits, Some(&mut grads));
            params.sgd_momentum_step(&grads, &mut velocity, lr, schedule.momentum)?;
        }

        let done = epoch + 1;
        let train_accuracy = accuracy(&params, train_set)?;
        let test_accuracy = accuracy(&params, test_set)?;
        log.push(EpochLog {
            epoch: done,
            lr,
            loss: loss_sum / order.len() as f64,
            train_accuracy,
            test_accuracy,
        });
        let snapshot = || Checkpoint {
            epoch: done,
            params: params.clone(),
            train_accuracy,
            test_accuracy,
        };
        if best.as_ref().map_or(true, |b| test_accuracy > b.test_accuracy) {
            best = Some(snapshot());
        }
        if done % schedule.checkpoint_every == 0 {
            periodic.push(snapshot());
        }
    }

    Ok(TrainOutcome {
        periodic,
        best: best.expect("at least one epoch ran"),
        log,
    })
}
