//! Two-parameter Weibull fitting on the upper tail of a distance sample.

use serde::{Deserialize, Serialize};

use super::{Result, SupervisorError};

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullModel {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(SupervisorError::InvalidConfig(format!(
                "Weibull shape and scale must be > 0, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn cdf(&self, d: f64) -> Result<f64> {
        weibull_cdf(d, self)
    }
}

/// `1 - exp(-(d / scale)^shape)` for `d >= 0`.
pub fn weibull_cdf(d: f64, m: &WeibullModel) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(SupervisorError::InvalidConfig(format!(
            "Weibull CDF needs a distance >= 0, got {d}"
        )));
    }
    Ok(-(-(d / m.scale).powf(m.shape)).exp_m1())
}

/// Maximum-likelihood fit to the `tail` largest distances.
///
/// The shape solves the profile equation
/// `1/k + mean(ln x) - sum(x^k ln x) / sum(x^k) = 0`, whose left side is
/// strictly decreasing in `k`; a Newton iteration guarded by a bisection
/// bracket finds the root. Data are divided by their maximum first, which
/// leaves the shape unchanged and rescales the scale.
pub fn weibull_fit_tail(distances: &[f64], tail: usize) -> Result<WeibullModel> {
    if tail < 2 {
        return Err(SupervisorError::InvalidConfig(format!(
            "tail length must be >= 2, got {tail}"
        )));
    }
    if distances.len() < tail {
        return Err(SupervisorError::DegenerateFit(format!(
            "tail length {tail} exceeds sample count {}",
            distances.len()
        )));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(SupervisorError::InvalidConfig(format!(
            "distances must be finite and >= 0, got {d}"
        )));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.truncate(tail);
    let max = sorted[0];
    let min = sorted[tail - 1];
    if max == min {
        return Err(SupervisorError::DegenerateFit(format!(
            "all {tail} tail values equal {max}"
        )));
    }
    if min <= 0.0 {
        return Err(SupervisorError::DegenerateFit(
            "tail contains a zero distance".into(),
        ));
    }

    let logs: Vec<f64> = sorted.iter().map(|x| (x / max).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / tail as f64;
    // returns (g(k), g'(k), sum y^k)
    let eval = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let m1 = s1 / s0;
        let g = 1.0 / k + mean_log - m1;
        let dg = -1.0 / (k * k) - (s2 / s0 - m1 * m1);
        (g, dg, s0)
    };

    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut k = 1.0f64;
    for _ in 0..MAX_ITER {
        let (g, dg, _) = eval(k);
        if g > 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let mut next = k - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * k };
        }
        let converged = (next - k).abs() <= REL_TOL * next;
        k = next;
        if converged {
            let (_, _, s0) = eval(k);
            let scale = max * (s0 / tail as f64).powf(1.0 / k);
            return WeibullModel::new(k, scale)
                .map_err(|e| SupervisorError::DegenerateFit(e.to_string()));
        }
    }
    Err(SupervisorError::NoConvergence(MAX_ITER))
}
