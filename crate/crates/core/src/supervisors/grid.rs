//! Per-model parameter search: every grid config is scored by its AUROC
//! against each OOD set, and the config with the best mean wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::odin::{odin_direction, score_perturbed};
use super::{
    max_softmax_anomaly, openmax_fit, OdinConfig, OpenMaxConfig, OpenMaxModel, Result, Sample,
    SupervisorConfig, SupervisorError, SupervisorKind,
};
use crate::dataio::ActivationRecord;
use crate::metrics::{auroc, ScoredSample};
use crate::netengine::NetworkParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdinGrid {
    pub temperatures: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for OdinGrid {
    fn default() -> Self {
        Self {
            temperatures: vec![50.0, 100.0, 200.0, 500.0, 700.0, 1000.0, 1500.0, 2000.0],
            epsilons: (0..=20).map(|i| 0.004 * i as f64 / 20.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenMaxGrid {
    pub tails: Vec<usize>,
    /// Values above the class count are dropped at search time.
    pub alphas: Vec<usize>,
}

impl Default for OpenMaxGrid {
    fn default() -> Self {
        Self {
            tails: vec![5, 10, 20, 50, 100],
            alphas: (1..=10).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub odin: OdinGrid,
    pub openmax: OpenMaxGrid,
}

/// Everything a search needs: the network (ODIN), the training activations
/// (OpenMax fits), labeled inliers and the named OOD sets.
#[derive(Debug, Clone, Copy)]
pub struct GridContext<'a> {
    pub params: &'a NetworkParams,
    pub train: &'a [ActivationRecord],
    pub inliers: &'a [Sample],
    pub ood_sets: &'a [(String, Vec<Sample>)],
}

impl GridContext<'_> {
    fn check(&self) -> Result<()> {
        if self.inliers.is_empty() {
            return Err(SupervisorError::EmptyDataset("no inlier samples".into()));
        }
        if self.ood_sets.is_empty() {
            return Err(SupervisorError::EmptyDataset("no OOD sets".into()));
        }
        if let Some((name, _)) = self.ood_sets.iter().find(|(_, s)| s.is_empty()) {
            return Err(SupervisorError::EmptyDataset(format!("OOD set {name} is empty")));
        }
        Ok(())
    }
}

/// One evaluated grid point. `aurocs` follows the order of the OOD sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub config: SupervisorConfig,
    pub aurocs: Vec<f64>,
    pub mean_auroc: Option<f64>,
    pub error: Option<String>,
}

impl GridRow {
    fn scored(config: SupervisorConfig, aurocs: Vec<f64>) -> Self {
        Self {
            mean_auroc: Some(order_free_mean(&aurocs)),
            config,
            aurocs,
            error: None,
        }
    }

    fn failed(config: SupervisorConfig, error: &SupervisorError) -> Self {
        Self {
            config,
            aurocs: Vec::new(),
            mean_auroc: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub config: SupervisorConfig,
    pub rows: Vec<GridRow>,
}

/// Mean that does not depend on the order of its inputs: values are summed
/// in sorted order.
fn order_free_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Index of the first row with the highest mean AUROC; failed rows are skipped.
pub fn select_best(rows: &[GridRow]) -> Result<usize> {
    if rows.is_empty() {
        return Err(SupervisorError::EmptyGrid);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(m) = row.mean_auroc {
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| {
        SupervisorError::InvalidConfig(format!(
            "every grid config failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("unknown")
        ))
    })
}

fn finish(rows: Vec<GridRow>) -> Result<GridResult> {
    let best = select_best(&rows)?;
    Ok(GridResult {
        config: rows[best].config,
        rows,
    })
}

fn auroc_of(inlier_scores: &[f64], inliers: &[Sample], outlier_scores: &[f64]) -> Result<f64> {
    let samples: Vec<ScoredSample> = inlier_scores
        .iter()
        .zip(inliers)
        .map(|(&a, s)| ScoredSample::inlier(a, s.record.is_correct()))
        .chain(outlier_scores.iter().map(|&a| ScoredSample::outlier(a)))
        .collect();
    Ok(auroc(&samples)?)
}

fn inputs_of(samples: &[Sample]) -> Result<Vec<&[f64]>> {
    samples
        .iter()
        .map(|s| {
            s.input.as_deref().ok_or_else(|| {
                SupervisorError::MissingInput("ODIN grid search needs raw inputs".into())
            })
        })
        .collect()
}

/// ODIN search, temperatures outer and epsilons inner. The gradient sign
/// depends only on the temperature, so it is computed once per temperature
/// and reused across all epsilons.
pub fn grid_search_odin(ctx: &GridContext<'_>, grid: &OdinGrid) -> Result<GridResult> {
    ctx.check()?;
    if grid.temperatures.is_empty() || grid.epsilons.is_empty() {
        return Err(SupervisorError::EmptyGrid);
    }
    let inliers = inputs_of(ctx.inliers)?;
    let ood: Vec<Vec<&[f64]>> = ctx
        .ood_sets
        .iter()
        .map(|(_, s)| inputs_of(s))
        .collect::<Result<_>>()?;

    let params = ctx.params;
    let directions = |xs: &[&[f64]], t: f64| -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| odin_direction(params, x, t)).collect()
    };
    let scores = |xs: &[&[f64]], dirs: &[Vec<f64>], c: OdinConfig| -> Result<Vec<f64>> {
        xs.par_iter()
            .zip(dirs)
            .map(|(x, d)| {
                if c.epsilon == 0.0 {
                    max_softmax_anomaly(&params.logits(x)?, c.temperature)
                } else {
                    score_perturbed(params, x, d, c)
                }
                .map(|a| a.value())
            })
            .collect()
    };

    let mut rows = Vec::with_capacity(grid.temperatures.len() * grid.epsilons.len());
    for &t in &grid.temperatures {
        let prepared = (|| -> Result<_> {
            let din = directions(&inliers, t)?;
            let dood = ood
                .iter()
                .map(|xs| directions(xs, t))
                .collect::<Result<Vec<_>>>()?;
            Ok((din, dood))
        })();
        for &e in &grid.epsilons {
            let outcome = (|| -> Result<(SupervisorConfig, Vec<f64>)> {
                let c = OdinConfig::new(t, e)?;
                let (din, dood) = prepared.as_ref().map_err(|e| {
                    SupervisorError::InvalidConfig(format!("gradient failed: {e}"))
                })?;
                let sin = scores(&inliers, din, c)?;
                let aurocs = ood
                    .iter()
                    .zip(dood)
                    .map(|(xs, d)| auroc_of(&sin, ctx.inliers, &scores(xs, d, c)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok((SupervisorConfig::Odin(c), aurocs))
            })();
            rows.push(match outcome {
                Ok((c, a)) => GridRow::scored(c, a),
                Err(err) => GridRow::failed(
                    SupervisorConfig::Odin(OdinConfig {
                        temperature: t,
                        epsilon: e,
                    }),
                    &err,
                ),
            });
        }
    }
    finish(rows)
}

/// OpenMax search, tails outer and alphas inner. Class means and Weibull
/// fits do not depend on alpha, so they are fitted once per tail.
pub fn grid_search_openmax(ctx: &GridContext<'_>, grid: &OpenMaxGrid) -> Result<GridResult> {
    ctx.check()?;
    let classes = ctx
        .train
        .first()
        .map(|r| r.logits.len())
        .ok_or_else(|| SupervisorError::EmptyDataset("no training activations".into()))?;
    let alphas: Vec<usize> = grid.alphas.iter().copied().filter(|&a| a <= classes).collect();
    if grid.tails.is_empty() || alphas.is_empty() {
        return Err(SupervisorError::EmptyGrid);
    }
    let score_all = |m: &OpenMaxModel, s: &[Sample]| -> Result<Vec<f64>> {
        s.par_iter().map(|s| m.anomaly(&s.record).map(|a| a.value())).collect()
    };

    let mut rows = Vec::with_capacity(grid.tails.len() * alphas.len());
    for &tail in &grid.tails {
        let fitted = openmax_fit(ctx.train, OpenMaxConfig::new(tail, alphas[0]));
        for &alpha in &alphas {
            let config = OpenMaxConfig::new(tail, alpha);
            let outcome = (|| -> Result<Vec<f64>> {
                let base = fitted.as_ref().map_err(|e| SupervisorError::InvalidConfig(e.to_string()))?;
                config.validate(classes)?;
                let model = OpenMaxModel {
                    classes: base.classes.clone(),
                    config,
                };
                let sin = score_all(&model, ctx.inliers)?;
                ctx.ood_sets
                    .iter()
                    .map(|(_, s)| auroc_of(&sin, ctx.inliers, &score_all(&model, s)?))
                    .collect()
            })();
            let c = SupervisorConfig::OpenMax(config);
            rows.push(match outcome {
                Ok(a) => GridRow::scored(c, a),
                Err(err) => GridRow::failed(c, &err),
            });
        }
    }
    finish(rows)
}

/// Picks one config for the model. Baseline has no parameters and returns
/// immediately with an empty table.
pub fn grid_search(kind: SupervisorKind, ctx: &GridContext<'_>, grids: &Grids) -> Result<GridResult> {
    match kind {
        SupervisorKind::Baseline => Ok(GridResult {
            config: SupervisorConfig::Baseline,
            rows: Vec::new(),
        }),
        SupervisorKind::Odin => grid_search_odin(ctx, &grids.odin),
        SupervisorKind::OpenMax => grid_search_openmax(ctx, &grids.openmax),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{gen_blobs, gen_noise, Dataset, SyntheticSpec};
    use crate::netengine::{train, NetworkSpec, TrainSchedule};

    struct Fixture {
        params: NetworkParams,
        train: Vec<ActivationRecord>,
        inliers: Vec<Sample>,
        ood: Vec<(String, Vec<Sample>)>,
    }

    fn samples(params: &NetworkParams, d: &Dataset) -> Vec<Sample> {
        d.activations(params)
            .unwrap()
            .into_iter()
            .zip(&d.inputs)
            .map(|(record, x)| Sample {
                record,
                input: Some(x.clone()),
            })
            .collect()
    }

    fn fixture() -> Fixture {
        let spec = SyntheticSpec::blobs(4, 3, 4.0, 1.0).unwrap();
        let tr = gen_blobs(&spec, 240, 1).unwrap();
        let te = gen_blobs(&spec, 60, 2).unwrap();
        let mut schedule = TrainSchedule::desk_default(3);
        schedule.total_epochs = 6;
        schedule.checkpoint_every = 3;
        schedule.batch_size = 32;
        let net = NetworkSpec::mlp(4, &[16], 3, 5).unwrap();
        let out = train(&net, tr.labeled().unwrap(), te.labeled().unwrap(), &schedule).unwrap();
        let params = out.best.params.clone();
        let train = tr.activations(&params).unwrap();
        let inliers = samples(&params, &te);
        let noise = gen_noise(4, 40, 0.5, 1.0, 9).unwrap();
        let far = gen_noise(4, 40, 6.0, 3.0, 10).unwrap();
        let ood = vec![
            ("noise".to_string(), samples(&params, &noise)),
            ("far".to_string(), samples(&params, &far)),
        ];
        Fixture {
            params,
            train,
            inliers,
            ood,
        }
    }

    impl Fixture {
        fn ctx(&self) -> GridContext<'_> {
            GridContext {
                params: &self.params,
                train: &self.train,
                inliers: &self.inliers,
                ood_sets: &self.ood,
            }
        }
    }

    fn row(aurocs: &[f64], t: f64) -> GridRow {
        GridRow::scored(
            SupervisorConfig::Odin(OdinConfig::new(t, 0.0).unwrap()),
            aurocs.to_vec(),
        )
    }

    #[test]
    fn best_mean_wins_first_on_ties() {
        let rows = vec![row(&[0.9, 0.8], 1.0), row(&[0.7, 0.95], 2.0)];
        assert_eq!(select_best(&rows).unwrap(), 0);
        let rows = vec![row(&[0.5, 0.7], 1.0), row(&[0.7, 0.5], 2.0), row(&[0.6, 0.6], 3.0)];
        assert_eq!(select_best(&rows).unwrap(), 0);
        assert!(matches!(select_best(&[]), Err(SupervisorError::EmptyGrid)));
        let failed = GridRow::failed(SupervisorConfig::Baseline, &SupervisorError::EmptyGrid);
        assert_eq!(select_best(&[failed.clone(), row(&[0.6], 1.0)]).unwrap(), 1);
        assert!(select_best(&[failed]).is_err());
    }

    #[test]
    fn default_grid_sizes() {
        let g = Grids::default();
        assert_eq!(g.odin.temperatures.len() * g.odin.epsilons.len(), 168);
        assert_eq!(g.odin.epsilons[20], 0.004);
        assert_eq!(g.odin.epsilons[0], 0.0);
    }

    #[test]
    fn searches_on_a_trained_model() {
        let f = fixture();
        let ctx = f.ctx();

        let single = OdinGrid {
            temperatures: vec![100.0],
            epsilons: vec![0.002],
        };
        let r = grid_search_odin(&ctx, &single).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.config, SupervisorConfig::Odin(OdinConfig::new(100.0, 0.002).unwrap()));
        // The cached-direction path agrees with the direct scorer.
        let sup = crate::supervisors::Supervisor::Odin {
            params: &f.params,
            config: OdinConfig::new(100.0, 0.002).unwrap(),
        };
        let a = sup.score(&f.ood[0].1[3]).unwrap().value();
        let dir = odin_direction(&f.params, f.ood[0].1[3].input.as_ref().unwrap(), 100.0).unwrap();
        let b = score_perturbed(&f.params, f.ood[0].1[3].input.as_ref().unwrap(), &dir, OdinConfig::new(100.0, 0.002).unwrap())
            .unwrap()
            .value();
        assert_eq!(a, b);

        let r = grid_search(SupervisorKind::OpenMax, &ctx, &Grids::default()).unwrap();
        assert_eq!(r.rows.len(), 15);
        assert!(matches!(r.config, SupervisorConfig::OpenMax(_)));
        // Tail 100 exceeds the correctly classified count of some class.
        assert!(r.rows.iter().any(|row| row.error.is_some()));

        let r = grid_search(SupervisorKind::Baseline, &ctx, &Grids::default()).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.config, SupervisorConfig::Baseline);
    }

    #[test]
    fn ood_order_does_not_matter() {
        let f = fixture();
        let grid = OdinGrid {
            temperatures: vec![1.0, 1000.0],
            epsilons: vec![0.0, 0.004],
        };
        let a = grid_search_odin(&f.ctx(), &grid).unwrap();
        let mut reversed = f.ood.clone();
        reversed.reverse();
        let ctx = GridContext {
            ood_sets: &reversed,
            ..f.ctx()
        };
        let b = grid_search_odin(&ctx, &grid).unwrap();
        assert_eq!(a.config, b.config);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.mean_auroc, rb.mean_auroc);
        }
    }

    #[test]
    fn empty_inputs() {
        let f = fixture();
        let none: Vec<(String, Vec<Sample>)> = Vec::new();
        let ctx = GridContext {
            ood_sets: &none,
            ..f.ctx()
        };
        assert!(matches!(
            grid_search_odin(&ctx, &OdinGrid::default()),
            Err(SupervisorError::EmptyDataset(_))
        ));
        let empty_grid = OdinGrid {
            temperatures: vec![],
            epsilons: vec![0.0],
        };
        assert!(matches!(
            grid_search_odin(&f.ctx(), &empty_grid),
            Err(SupervisorError::EmptyGrid)
        ));
    }
}
