use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::commands::{
    config_file, evaluate_cell, load_checkpoint, load_config, load_grids, parse_ood_sets,
    search_and_write, Prepared, BEST_CHECKPOINT,
};
use super::{load_dump, require, HarnessError, Loaded, Result, RunContext};
use crate::metrics::MetricSummary;
use crate::netengine::Checkpoint;
use crate::supervisors::{Sample, SupervisorConfig, SupervisorKind};

pub const SWEEP_HEADER: &str = "epoch,test_accuracy,supervisor,ood_set,auroc,fpr_at_95_tpr,cbpl,cov10";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOpts {
    /// Directory of `.oodc` files.
    pub checkpoints: PathBuf,
    pub train_data: Option<PathBuf>,
    pub inliers: PathBuf,
    pub ood: Vec<(String, PathBuf)>,
    pub supervisors: Vec<SupervisorKind>,
    /// Output dir of an earlier gridsearch run, holding
    /// `configs/<supervisor>_config.json`. Defaults to this run's output dir.
    /// Missing configs are grid-searched on the best checkpoint first.
    pub configs: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

/// One (checkpoint, supervisor, OOD set) cell; `metrics` is `None` if the
/// cell failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epoch: u32,
    pub test_accuracy: f64,
    pub supervisor: SupervisorKind,
    pub ood_set: String,
    pub metrics: Option<MetricSummary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let metrics = match &self.metrics {
            Some(m) => format!("{},{},{},{}", m.auroc, m.fpr_at_95_tpr, m.cbpl, m.cov10),
            None => "NA,NA,NA,NA".to_string(),
        };
        format!(
            "{},{},{},{},{}",
            self.epoch, self.test_accuracy, self.supervisor, self.ood_set, metrics
        )
    }
}

fn list_checkpoints(dir: &Path) -> Result<Vec<(String, Checkpoint)>> {
    require(dir)?;
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::Input {
        path: dir.to_path_buf(),
        source: e.into(),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "oodc"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::MissingInput(dir.join("*.oodc")));
    }
    files
        .iter()
        .map(|p| {
            let name = p.file_name().expect("listed file").to_string_lossy().into_owned();
            Ok((name, load_checkpoint(p)?))
        })
        .collect()
}

/// The tagged best checkpoint, or the highest test accuracy (earliest on ties).
fn best_of(checkpoints: &[(String, Checkpoint)]) -> &Checkpoint {
    if let Some((_, c)) = checkpoints.iter().find(|(n, _)| n == BEST_CHECKPOINT) {
        return c;
    }
    let mut best = &checkpoints[0].1;
    for (_, c) in checkpoints {
        if c.test_accuracy > best.test_accuracy
            || (c.test_accuracy == best.test_accuracy && c.epoch < best.epoch)
        {
            best = c;
        }
    }
    best
}

fn require_raw(name: &str, l: &Loaded) -> Result<()> {
    if l.is_raw() {
        Ok(())
    } else {
        Err(HarnessError::Usage(format!(
            "sweep needs raw-input dumps; {name} holds exported activations"
        )))
    }
}

/// Evaluates every checkpoint with every supervisor on every OOD set and
/// writes `sweep.csv`. Failed cells become `NA` rows and the command
/// reports a partial failure after the file is written.
pub fn cmd_sweep(ctx: &mut RunContext, opts: &SweepOpts) -> Result<Vec<SweepRow>> {
    if opts.supervisors.is_empty() {
        return Err(HarnessError::Usage("no supervisors selected".into()));
    }
    let checkpoints = list_checkpoints(&opts.checkpoints)?;
    let inliers = load_dump(&opts.inliers)?;
    require_raw("the inlier dump", &inliers)?;
    let ood = parse_ood_sets(&opts.ood)?;
    for (name, l) in &ood {
        require_raw(name, l)?;
    }
    let train = opts.train_data.as_deref().map(load_dump).transpose()?;
    if let Some(t) = &train {
        require_raw("the training dump", t)?;
    }
    if opts.supervisors.contains(&SupervisorKind::OpenMax) && train.is_none() {
        return Err(HarnessError::Usage("openmax needs --train-data".into()));
    }

    let mut kinds = opts.supervisors.clone();
    kinds.sort();
    kinds.dedup();
    let configs_dir = opts.configs.clone().unwrap_or_else(|| ctx.out.clone());
    let mut configs: Vec<SupervisorConfig> = Vec::with_capacity(kinds.len());
    let mut missing = Vec::new();
    for &k in &kinds {
        let path = configs_dir.join(config_file(k));
        if k == SupervisorKind::Baseline {
            configs.push(SupervisorConfig::Baseline);
        } else if path.exists() {
            let c = load_config(&path)?;
            if c.kind() != k {
                return Err(HarnessError::Usage(format!(
                    "{} holds a {} config",
                    path.display(),
                    c.kind()
                )));
            }
            configs.push(c);
        } else {
            missing.push(k);
            configs.push(SupervisorConfig::Baseline);
        }
    }
    if !missing.is_empty() {
        let grids = load_grids(opts.grid.as_deref())?;
        let best = best_of(&checkpoints);
        let found = search_and_write(ctx, &best.params, train.as_ref(), &inliers, &ood, &missing, &grids)?;
        for (k, result) in found {
            let i = kinds.iter().position(|&x| x == k).expect("searched kind is selected");
            configs[i] = result.config;
        }
    }

    let cell_rows: Vec<Vec<SweepRow>> = checkpoints
        .par_iter()
        .map(|(_, ck)| sweep_checkpoint(ck, &kinds, &configs, train.as_ref(), &inliers, &ood))
        .collect();
    let mut rows: Vec<SweepRow> = cell_rows.into_iter().flatten().collect();
    // Stable: checkpoints sharing an epoch keep file-name order.
    rows.sort_by(|a, b| {
        (a.epoch, a.supervisor, &a.ood_set).cmp(&(b.epoch, b.supervisor, &b.ood_set))
    });

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    ctx.write("sweep.csv", csv.as_bytes())?;

    let failed = rows.iter().filter(|r| r.metrics.is_none()).count();
    if failed > 0 {
        for r in rows.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "epoch {} {} {}: {}",
                r.epoch,
                r.supervisor,
                r.ood_set,
                r.error.as_deref().unwrap_or_default()
            );
        }
        return Err(HarnessError::PartialFailure {
            failed,
            total: rows.len(),
        });
    }
    Ok(rows)
}

fn sweep_checkpoint(
    ck: &Checkpoint,
    kinds: &[SupervisorKind],
    configs: &[SupervisorConfig],
    train: Option<&Loaded>,
    inliers: &Loaded,
    ood: &[(String, Loaded)],
) -> Vec<SweepRow> {
    let params = Some(&ck.params);
    let row = |kind: SupervisorKind, name: &str, outcome: Result<MetricSummary>| {
        let (metrics, error) = match outcome {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRow {
            epoch: ck.epoch,
            test_accuracy: ck.test_accuracy,
            supervisor: kind,
            ood_set: name.to_string(),
            metrics,
            error,
        }
    };

    let samples = (|| -> Result<(Vec<Sample>, Vec<Vec<Sample>>)> {
        let inl = inliers.samples(params)?;
        let out = ood
            .iter()
            .map(|(_, l)| l.samples(params))
            .collect::<Result<Vec<_>>>()?;
        Ok((inl, out))
    })();
    let (inl, outs) = match samples {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return kinds
                .iter()
                .flat_map(|&k| {
                    ood.iter().map(move |(n, _)| (k, n.clone()))
                })
                .map(|(k, n)| row(k, &n, Err(HarnessError::Usage(msg.clone()))))
                .collect();
        }
    };
    let train_records = match train {
        Some(t) if kinds.contains(&SupervisorKind::OpenMax) => Some(t.records(params)),
        _ => None,
    };

    let mut rows = Vec::new();
    for (&kind, config) in kinds.iter().zip(configs) {
        let prepared = match &train_records {
            Some(Ok(records)) => Prepared::new(config, Some(records)),
            Some(Err(e)) if kind == SupervisorKind::OpenMax => {
                Err(HarnessError::Usage(e.to_string()))
            }
            _ => Prepared::new(config, None),
        };
        for ((name, _), outliers) in ood.iter().zip(&outs) {
            let outcome = match &prepared {
                Ok(p) => evaluate_cell(p, params, ck.test_accuracy, &inl, outliers),
                Err(e) => Err(HarnessError::Usage(e.to_string())),
            };
            rows.push(row(kind, name, outcome));
        }
    }
    rows
}
