use super::{NetError, Result};

/// Temperature-scaled softmax. Logits are divided by `temperature` first and
/// the maximum scaled value is subtracted before exponentiation.
pub fn softmax_stable(v: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(NetError::Shape("softmax of empty vector".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(NetError::Numeric(format!(
            "temperature must be finite and > 0, got {temperature}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NetError::Numeric("non-finite logit".into()));
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Index of the largest value; the first index wins ties.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}
