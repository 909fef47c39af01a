//! OpenMax: per-class mean activation vectors with Weibull models of the
//! distance tail, used to move activation mass from the top-ranked classes
//! into an extra "unknown" class before the softmax.

use serde::{Deserialize, Serialize};

use super::{weibull_cdf, weibull_fit_tail, AnomalyScore, Result, SupervisorError, WeibullModel};
use crate::dataio::ActivationRecord;
use crate::netengine::softmax_stable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[default]
    Euclidean,
}

/// Which activation vector the class means and distances are computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationLayer {
    #[default]
    Logits,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenMaxConfig {
    /// Number of largest distances used for each Weibull fit.
    pub tail: usize,
    /// Number of top-ranked classes whose activations are revised.
    pub alpha: usize,
    #[serde(default)]
    pub distance: DistanceKind,
    #[serde(default)]
    pub layer: ActivationLayer,
}

impl OpenMaxConfig {
    pub fn new(tail: usize, alpha: usize) -> Self {
        Self {
            tail,
            alpha,
            distance: DistanceKind::Euclidean,
            layer: ActivationLayer::Logits,
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.tail < 2 {
            return Err(SupervisorError::InvalidConfig(format!(
                "OpenMax tail must be >= 2, got {}",
                self.tail
            )));
        }
        if self.alpha == 0 || self.alpha > classes {
            return Err(SupervisorError::InvalidConfig(format!(
                "OpenMax alpha must be in 1..={classes}, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: usize,
    pub mav: Vec<f64>,
    pub weibull: WeibullModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenMaxModel {
    pub classes: Vec<ClassModel>,
    pub config: OpenMaxConfig,
}

/// Revised known-class activations and the synthesized unknown activation.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisedActivations {
    pub known: Vec<f64>,
    pub unknown: f64,
}

impl RevisedActivations {
    /// Softmax over `[unknown, known...]`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(self.known.len() + 1);
        v.push(self.unknown);
        v.extend_from_slice(&self.known);
        Ok(softmax_stable(&v, 1.0)?)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Component-wise mean of equally sized vectors.
pub fn mean_activation(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| SupervisorError::EmptyDataset("no vectors to average".into()))?;
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        if v.len() != sum.len() {
            return Err(SupervisorError::Dimension(format!(
                "vector of length {} among length {}",
                v.len(),
                sum.len()
            )));
        }
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Classes ranked by logit, descending; lower index first on ties.
fn ranking(logits: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..logits.len()).collect();
    idx.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
    idx
}

/// Applies the rank-weighted revision given each class's Weibull CDF value.
///
/// For rank `r = 1..=alpha` with class `s`:
/// `w_s = 1 - (alpha - r + 1) / alpha * cdf_s`; other classes keep `w = 1`.
/// Known activations become `v_j * w_j`, the unknown activation is
/// `sum_j v_j * (1 - w_j)`.
pub fn revise_activations(logits: &[f64], cdfs: &[f64], alpha: usize) -> Result<RevisedActivations> {
    if logits.len() != cdfs.len() {
        return Err(SupervisorError::Dimension(format!(
            "{} logits but {} CDF values",
            logits.len(),
            cdfs.len()
        )));
    }
    if alpha == 0 || alpha > logits.len() {
        return Err(SupervisorError::InvalidConfig(format!(
            "alpha must be in 1..={}, got {alpha}",
            logits.len()
        )));
    }
    let mut weights = vec![1.0; logits.len()];
    for (r, &class) in ranking(logits).iter().take(alpha).enumerate() {
        let rank_weight = (alpha - r) as f64 / alpha as f64;
        weights[class] = 1.0 - rank_weight * cdfs[class];
    }
    let known = logits.iter().zip(&weights).map(|(v, w)| v * w).collect();
    let unknown = logits.iter().zip(&weights).map(|(v, w)| v * (1.0 - w)).sum();
    Ok(RevisedActivations { known, unknown })
}

fn layer_vector<'a>(record: &'a ActivationRecord, layer: ActivationLayer) -> Result<&'a [f64]> {
    match layer {
        ActivationLayer::Logits => Ok(&record.logits),
        ActivationLayer::Features => record.features.as_deref().ok_or_else(|| {
            SupervisorError::MissingInput("OpenMax feature layer selected but record has no features".into())
        }),
    }
}

/// Fits one mean activation vector and Weibull tail per class from the
/// correctly classified training records.
pub fn openmax_fit(train: &[ActivationRecord], config: OpenMaxConfig) -> Result<OpenMaxModel> {
    let classes = train
        .first()
        .map(|r| r.logits.len())
        .ok_or_else(|| SupervisorError::EmptyDataset("OpenMax training records".into()))?;
    if classes < 2 {
        return Err(SupervisorError::TooFewClasses(classes));
    }
    config.validate(classes)?;
    if let Some(i) = train.iter().position(|r| r.logits.len() != classes) {
        return Err(SupervisorError::Dimension(format!(
            "training record {i} has {} logits, expected {classes}",
            train[i].logits.len()
        )));
    }

    let mut per_class: Vec<Vec<&[f64]>> = vec![Vec::new(); classes];
    for r in train.iter().filter(|r| r.is_correct()) {
        per_class[r.predicted().expect("non-empty logits")].push(layer_vector(r, config.layer)?);
    }

    let models = per_class
        .iter()
        .enumerate()
        .map(|(class, vectors)| {
            if vectors.len() < config.tail {
                return Err(SupervisorError::ClassFit {
                    class,
                    message: format!(
                        "{} correctly classified samples, tail length {} needs more",
                        vectors.len(),
                        config.tail
                    ),
                });
            }
            let mav = mean_activation(vectors)?;
            let distances: Vec<f64> = vectors.iter().map(|v| euclidean(v, &mav)).collect();
            let weibull = weibull_fit_tail(&distances, config.tail).map_err(|e| {
                SupervisorError::ClassFit {
                    class,
                    message: e.to_string(),
                }
            })?;
            Ok(ClassModel {
                label: class,
                mav,
                weibull,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OpenMaxModel {
        classes: models,
        config,
    })
}

impl OpenMaxModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Weibull CDF of each class's distance to `vector`.
    pub fn cdfs(&self, vector: &[f64]) -> Result<Vec<f64>> {
        self.classes
            .iter()
            .map(|c| {
                if c.mav.len() != vector.len() {
                    return Err(SupervisorError::Dimension(format!(
                        "activation length {} but class {} MAV has length {}",
                        vector.len(),
                        c.label,
                        c.mav.len()
                    )));
                }
                weibull_cdf(euclidean(vector, &c.mav), &c.weibull)
            })
            .collect()
    }

    pub fn revise(&self, record: &ActivationRecord) -> Result<RevisedActivations> {
        if record.logits.len() != self.num_classes() {
            return Err(SupervisorError::Dimension(format!(
                "{} logits for a {}-class model",
                record.logits.len(),
                self.num_classes()
            )));
        }
        let cdfs = self.cdfs(layer_vector(record, self.config.layer)?)?;
        revise_activations(&record.logits, &cdfs, self.config.alpha)
    }

    /// `1 - max` over the known-class probabilities of the revised softmax.
    pub fn anomaly(&self, record: &ActivationRecord) -> Result<AnomalyScore> {
        let revised = self.revise(record)?;
        anomaly_of(&revised)
    }

    /// Scores bare logits; only valid for logit-layer models.
    pub fn anomaly_logits(&self, logits: &[f64]) -> Result<AnomalyScore> {
        if self.config.layer != ActivationLayer::Logits {
            return Err(SupervisorError::MissingInput(
                "feature-layer model needs full records".into(),
            ));
        }
        self.anomaly(&ActivationRecord::new(-1, logits.to_vec(), None))
    }

    /// JSON document with every float printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let layer = match self.config.layer {
            ActivationLayer::Logits => "logits",
            ActivationLayer::Features => "features",
        };
        let classes: Vec<String> = self
            .classes
            .iter()
            .map(|c| {
                let mav: Vec<String> = c.mav.iter().map(|&v| num(v)).collect();
                format!(
                    "    {{\"label\": {}, \"mav\": [{}], \"weibull\": {{\"shape\": {}, \"scale\": {}}}, \"tail\": {}, \"alpha\": {}}}",
                    c.label,
                    mav.join(", "),
                    num(c.weibull.shape),
                    num(c.weibull.scale),
                    self.config.tail,
                    self.config.alpha
                )
            })
            .collect();
        format!(
            "{{\n  \"layer\": \"{layer}\",\n  \"classes\": [\n{}\n  ]\n}}\n",
            classes.join(",\n")
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct ClassDoc {
            label: usize,
            mav: Vec<f64>,
            weibull: WeibullModel,
            tail: usize,
            alpha: usize,
        }
        #[derive(Deserialize)]
        struct Doc {
            #[serde(default)]
            layer: ActivationLayer,
            classes: Vec<ClassDoc>,
        }
        let doc: Doc = serde_json::from_str(text)
            .map_err(|e| SupervisorError::InvalidConfig(format!("OpenMax model JSON: {e}")))?;
        let first = doc
            .classes
            .first()
            .ok_or_else(|| SupervisorError::InvalidConfig("OpenMax model has no classes".into()))?;
        let config = OpenMaxConfig {
            tail: first.tail,
            alpha: first.alpha,
            distance: DistanceKind::Euclidean,
            layer: doc.layer,
        };
        config.validate(doc.classes.len())?;
        let mut classes = Vec::with_capacity(doc.classes.len());
        for (i, c) in doc.classes.into_iter().enumerate() {
            if c.label != i || c.tail != config.tail || c.alpha != config.alpha {
                return Err(SupervisorError::InvalidConfig(format!(
                    "class entry {i} is out of order or has a different tail/alpha"
                )));
            }
            classes.push(ClassModel {
                label: c.label,
                mav: c.mav,
                weibull: WeibullModel::new(c.weibull.shape, c.weibull.scale)?,
            });
        }
        Ok(Self { classes, config })
    }
}

fn anomaly_of(revised: &RevisedActivations) -> Result<AnomalyScore> {
    let p = revised.probabilities()?;
    let top_known = p[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AnomalyScore::new(1.0 - top_known)
}

/// Anomaly with the revision skipped entirely, i.e. softmax over `(0, v)`.
#[cfg(test)]
fn zero_cdf_anomaly(logits: &[f64]) -> f64 {
    let mut v = vec![0.0];
    v.extend_from_slice(logits);
    let p = softmax_stable(&v, 1.0).unwrap();
    1.0 - p[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(mavs: Vec<Vec<f64>>, weibull: WeibullModel, alpha: usize) -> OpenMaxModel {
        OpenMaxModel {
            classes: mavs
                .into_iter()
                .enumerate()
                .map(|(label, mav)| ClassModel { label, mav, weibull })
                .collect(),
            config: OpenMaxConfig::new(5, alpha),
        }
    }

    #[test]
    fn mean_of_two() {
        let a = [0.0, 2.0];
        let b = [2.0, 0.0];
        assert_eq!(mean_activation(&[&a, &b]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_cdf_leaves_logits() {
        let v = [3.0, -1.0, 0.5];
        let r = revise_activations(&v, &[0.0; 3], 3).unwrap();
        assert_eq!(r.known, v.to_vec());
        assert_eq!(r.unknown, 0.0);
        // Distances of zero give zero CDFs.
        let m = model(
            vec![v.to_vec(), v.to_vec(), v.to_vec()],
            WeibullModel::new(1.5, 2.0).unwrap(),
            2,
        );
        let rec = ActivationRecord::new(-1, v.to_vec(), None);
        let a = m.anomaly(&rec).unwrap().value();
        assert!((a - zero_cdf_anomaly(&v)).abs() < 1e-15);
    }

    #[test]
    fn full_revision_moves_mass_to_unknown() {
        let v = [4.0, 1.0, 0.5];
        let r = revise_activations(&v, &[1.0, 0.3, 0.9], 1).unwrap();
        assert_eq!(r.known, vec![0.0, 1.0, 0.5]);
        assert_eq!(r.unknown, 4.0);
        let p = r.probabilities().unwrap();
        let a = 1.0 - p[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(a > zero_cdf_anomaly(&v));
    }

    #[test]
    fn hand_computed_two_class_chain() {
        // logits [2, 1]; class 0 ranks first at distance 0 -> cdf 0, w0 = 1.
        // class 1 ranks second at distance sqrt 2 -> cdf 1 - e^{-sqrt 2},
        // w1 = 1 - (1/2) cdf. Known [2, w1], unknown 1 - w1.
        let cdf1 = 1.0 - (-(2f64.sqrt())).exp();
        let w1 = 1.0 - 0.5 * cdf1;
        let (u, k0, k1) = (1.0 - w1, 2.0f64, w1);
        let z = u.exp() + k0.exp() + k1.exp();
        let expected = 1.0 - k0.exp() / z;

        let m = model(
            vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            WeibullModel::new(1.0, 1.0).unwrap(),
            2,
        );
        let a = m.anomaly_logits(&[2.0, 1.0]).unwrap().value();
        assert!((a - expected).abs() < 1e-15, "{a} vs {expected}");
    }

    #[test]
    fn fit_uses_correct_samples_per_class() {
        let mut recs = Vec::new();
        for i in 0..6 {
            let d = i as f64 * 0.1;
            recs.push(ActivationRecord::new(0, vec![2.0 + d, 0.0], None));
            recs.push(ActivationRecord::new(1, vec![0.0, 3.0 - d], None));
        }
        // misclassified, must be ignored
        recs.push(ActivationRecord::new(0, vec![0.0, 50.0], None));
        let m = openmax_fit(&recs, OpenMaxConfig::new(4, 2)).unwrap();
        assert!((m.classes[0].mav[0] - 2.25).abs() < 1e-12);
        assert!((m.classes[1].mav[1] - 2.75).abs() < 1e-12);
        assert_eq!(m.classes[1].mav[0], 0.0);
    }

    #[test]
    fn fit_errors_name_the_class() {
        let mut recs = Vec::new();
        for _ in 0..6 {
            recs.push(ActivationRecord::new(0, vec![1.0, 0.0], None));
        }
        for i in 0..6 {
            recs.push(ActivationRecord::new(1, vec![0.0, 1.0 + i as f64], None));
        }
        match openmax_fit(&recs, OpenMaxConfig::new(4, 1)) {
            Err(SupervisorError::ClassFit { class: 0, message }) => {
                assert!(message.contains("degenerate"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
        match openmax_fit(&recs[6..], OpenMaxConfig::new(4, 1)) {
            Err(SupervisorError::ClassFit { class: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(openmax_fit(&recs, OpenMaxConfig::new(4, 3)).is_err());
        assert!(openmax_fit(&recs, OpenMaxConfig::new(1, 1)).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model(
            vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-7, 7.0]],
            WeibullModel::new(std::f64::consts::PI, 1.0 / 7.0).unwrap(),
            2,
        );
        let text = m.to_json();
        assert!(text.contains("3.1415926535897931e0"));
        assert_eq!(OpenMaxModel::from_json(&text).unwrap(), m);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["classes"][1]["tail"], 5);
        assert!(v["classes"][0]["weibull"]["shape"].is_f64());
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(vec![vec![0.0, 1.0], vec![1.0, 0.0]], WeibullModel::new(1.0, 1.0).unwrap(), 1);
        assert!(m.anomaly_logits(&[1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        /// Raising one CDF never lowers the unknown activation when the
        /// revised classes have non-negative logits.
        #[test]
        fn unknown_monotone_in_cdf(
            logits in prop::collection::vec(0.0f64..10.0, 2..6),
            cdfs in prop::collection::vec(0.0f64..=1.0, 6),
            which in 0usize..6,
            bump in 0.0f64..1.0,
            alpha_pick in 1usize..6,
        ) {
            let n = logits.len();
            let cdfs = &cdfs[..n];
            let alpha = alpha_pick.min(n);
            let j = which % n;
            let mut raised = cdfs.to_vec();
            raised[j] = (raised[j] + bump).min(1.0);
            let a = revise_activations(&logits, cdfs, alpha).unwrap();
            let b = revise_activations(&logits, &raised, alpha).unwrap();
            prop_assert!(b.unknown >= a.unknown - 1e-12);
        }
    }
}
