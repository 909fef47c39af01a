//! Independent reference implementations shared by the integration tests.
//! Everything here is written the slow, obvious way on purpose.
#![allow(dead_code)]

use oodbench::metrics::ScoredSample;
use oodbench::netengine::{DenseParams, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Probability that an outlier outscores an inlier, ties counted one half.
pub fn pairwise_auroc(s: &[ScoredSample]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for o in s.iter().filter(|x| x.is_outlier) {
        for i in s.iter().filter(|x| !x.is_outlier) {
            pairs += 1.0;
            if o.anomaly > i.anomaly {
                wins += 1.0;
            } else if o.anomaly == i.anomaly {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// -inf, each score, every midpoint between neighbouring distinct scores,
/// and +inf.
pub fn midpoint_thresholds(s: &[ScoredSample]) -> Vec<f64> {
    let mut v: Vec<f64> = s.iter().map(|x| x.anomaly).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut t = vec![f64::NEG_INFINITY, f64::INFINITY];
    t.extend(&v);
    t.extend(v.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

pub struct Sweep {
    pub tpr: f64,
    pub fpr: f64,
    pub coverage: f64,
    pub accuracy: f64,
}

/// Counts at one threshold; `a < t` is accepted.
pub fn at_threshold(s: &[ScoredSample], t: f64) -> Sweep {
    let n_out = s.iter().filter(|x| x.is_outlier).count() as f64;
    let n_in = s.len() as f64 - n_out;
    let rej_out = s.iter().filter(|x| x.is_outlier && !(x.anomaly < t)).count() as f64;
    let rej_in = s.iter().filter(|x| !x.is_outlier && !(x.anomaly < t)).count() as f64;
    let accepted = s.iter().filter(|x| x.anomaly < t).count();
    let correct = s
        .iter()
        .filter(|x| x.anomaly < t && !x.is_outlier && x.inlier_correct)
        .count();
    Sweep {
        tpr: if n_out > 0.0 { rej_out / n_out } else { f64::NAN },
        fpr: if n_in > 0.0 { rej_in / n_in } else { f64::NAN },
        coverage: accepted as f64 / s.len() as f64,
        accuracy: if accepted == 0 {
            1.0
        } else {
            correct as f64 / accepted as f64
        },
    }
}

pub fn brute_fpr_at_tpr(s: &[ScoredSample], level: f64) -> f64 {
    midpoint_thresholds(s)
        .into_iter()
        .map(|t| at_threshold(s, t))
        .filter(|p| p.tpr >= level)
        .map(|p| p.fpr)
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_breakpoint(s: &[ScoredSample], min_accuracy: f64) -> f64 {
    midpoint_thresholds(s)
        .into_iter()
        .map(|t| at_threshold(s, t))
        .filter(|p| p.accuracy >= min_accuracy)
        .map(|p| p.coverage)
        .fold(0.0, f64::max)
}

/// Random scored set of 3..=64 samples with both classes present. With
/// `ties` the scores come from a small grid so duplicates are common.
pub fn random_scored_set(rng: &mut ChaCha8Rng, ties: bool) -> Vec<ScoredSample> {
    let n = rng.gen_range(3..=64);
    let n_out = rng.gen_range(1..n);
    (0..n)
        .map(|i| {
            let a = if ties {
                rng.gen_range(0..8) as f64 / 8.0
            } else {
                rng.gen::<f64>()
            };
            if i < n_out {
                ScoredSample::outlier(a)
            } else {
                ScoredSample::inlier(a, rng.gen_bool(0.7))
            }
        })
        .collect()
}

/// Dense/ReLU net with the given widths and weights uniform in [-1, 1].
pub fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> NetworkParams {
    let layers = dims
        .windows(2)
        .map(|w| {
            let mut d = DenseParams::zeros(w[0], w[1]);
            d.weights.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            d.bias.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            d
        })
        .collect();
    NetworkParams::new(layers).unwrap()
}

pub fn random_small_net(rng: &mut ChaCha8Rng) -> NetworkParams {
    let depth = rng.gen_range(1..=3);
    let mut dims = vec![rng.gen_range(2..=6)];
    for _ in 0..depth {
        dims.push(rng.gen_range(2..=8));
    }
    dims.push(rng.gen_range(2..=5));
    random_net(rng, &dims)
}

pub fn random_input(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain nested-loop forward pass.
pub fn reference_logits(p: &NetworkParams, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (l, layer) in p.layers.iter().enumerate() {
        let mut y = vec![0.0; layer.cols];
        for j in 0..layer.cols {
            let mut acc = layer.bias[j];
            for i in 0..layer.rows {
                acc += h[i] * layer.weights[i * layer.cols + j];
            }
            y[j] = if l + 1 < p.layers.len() { acc.max(0.0) } else { acc };
        }
        h = y;
    }
    h
}

/// `-log max softmax(logits / T)` with the winning class held fixed at `top`.
pub fn neg_log_top(p: &NetworkParams, x: &[f64], temperature: f64, top: usize) -> f64 {
    let z: Vec<f64> = reference_logits(p, x).iter().map(|v| v / temperature).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[top]
}

/// Worst relative error of `grad` against central differences, or `None`
/// when the sample sits too close to a ReLU kink or an argmax switch for the
/// difference quotient to mean anything.
pub fn finite_difference_error(
    p: &NetworkParams,
    x: &[f64],
    temperature: f64,
    grad: &[f64],
) -> Option<f64> {
    let logits = reference_logits(p, x);
    let top = (0..logits.len())
        .max_by(|&a, &b| logits[a].total_cmp(&logits[b]).then(b.cmp(&a)))
        .unwrap();
    let h = 1e-5;
    let mut num = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (
            neg_log_top(p, &xp, temperature, top),
            neg_log_top(p, &xm, temperature, top),
        );
        // Second-difference check: a kink inside [x-h, x+h] breaks linearity.
        let mid = neg_log_top(p, x, temperature, top);
        let mut xp2 = x.to_vec();
        let mut xm2 = x.to_vec();
        xp2[i] += 2.0 * h;
        xm2[i] -= 2.0 * h;
        let wide = (neg_log_top(p, &xp2, temperature, top) - neg_log_top(p, &xm2, temperature, top))
            / (4.0 * h);
        let narrow = (fp - fm) / (2.0 * h);
        if (wide - narrow).abs() > 1e-6 * (1.0 + narrow.abs()) || !mid.is_finite() {
            return None;
        }
        num.push(narrow);
    }
    let scale = num
        .iter()
        .chain(grad)
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1e-3);
    Some(
        num.iter()
            .zip(grad)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max),
    )
}
