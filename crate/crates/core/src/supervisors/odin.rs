use serde::{Deserialize, Serialize};

use super::{max_softmax_anomaly, AnomalyScore, Result, SupervisorError};
use crate::netengine::NetworkParams;

/// Temperature scaling plus input perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdinConfig {
    pub temperature: f64,
    /// Perturbation magnitude applied along the gradient sign.
    pub epsilon: f64,
}

impl OdinConfig {
    pub fn new(temperature: f64, epsilon: f64) -> Result<Self> {
        let c = Self {
            temperature,
            epsilon,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(SupervisorError::InvalidConfig(format!(
                "ODIN temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(SupervisorError::InvalidConfig(format!(
                "ODIN epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign of the input gradient of `-log max softmax(logits / T)`. Stepping
/// against it raises the top-class probability.
pub fn odin_direction(params: &NetworkParams, x: &[f64], temperature: f64) -> Result<Vec<f64>> {
    Ok(params
        .input_gradient(x, temperature)?
        .into_iter()
        .map(sign)
        .collect())
}

/// Scores `x - eps * direction` at the given temperature.
pub(crate) fn score_perturbed(
    params: &NetworkParams,
    x: &[f64],
    direction: &[f64],
    config: OdinConfig,
) -> Result<AnomalyScore> {
    let perturbed: Vec<f64> = x
        .iter()
        .zip(direction)
        .map(|(xi, d)| xi - config.epsilon * d)
        .collect();
    max_softmax_anomaly(&params.logits(&perturbed)?, config.temperature)
}

/// `1 - max softmax(f(x~) / T)` with `x~ = x - eps * sign(grad_x L)`.
pub fn odin_anomaly(params: &NetworkParams, x: &[f64], config: OdinConfig) -> Result<AnomalyScore> {
    config.validate()?;
    if params.num_classes() < 2 {
        return Err(SupervisorError::TooFewClasses(params.num_classes()));
    }
    if config.epsilon == 0.0 {
        return max_softmax_anomaly(&params.logits(x)?, config.temperature);
    }
    let direction = odin_direction(params, x, config.temperature)?;
    score_perturbed(params, x, &direction, config)
}
