use std::path::{Path, PathBuf};

use super::inputs::labeled_accuracy;
use super::{load_dump, require, HarnessError, Loaded, Result, RunContext};
use crate::dataio::{
    encode_dump, gen_blobs, gen_noise, gen_shifted, Dataset, DatasetKind, DatasetManifest,
    DatasetSource, SyntheticSpec,
};
use crate::metrics::{evaluate, EvaluationReport, MetricSummary};
use crate::netengine::{train, Augmentation, Checkpoint, NetworkParams, NetworkSpec, TrainSchedule};
use crate::supervisors::{
    grid_search, openmax_fit, ActivationLayer, GridContext, GridResult, Grids, OdinConfig,
    OpenMaxModel, Sample, Supervisor, SupervisorConfig, SupervisorKind,
};
use crate::dataio::ActivationRecord;

// ---------------------------------------------------------------- gen

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Blobs,
    Shifted,
    Noise,
    /// Train/test blobs plus shifted and noise outliers in one go.
    Desk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOpts {
    pub kind: GenKind,
    pub n: usize,
    /// Training-set size for the desk suite.
    pub n_train: usize,
    pub dim: usize,
    pub classes: usize,
    /// Distance of every class mean from the origin.
    pub radius: f64,
    pub sigma: f64,
    /// Shift length in units of sigma, along the last coordinate axis.
    pub shift: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub name: Option<String>,
}

impl Default for GenOpts {
    fn default() -> Self {
        Self {
            kind: GenKind::Desk,
            n: 1500,
            n_train: 3000,
            dim: 16,
            classes: 3,
            radius: 4.0,
            sigma: 1.0,
            shift: 3.0,
            noise_mean: 0.5,
            noise_std: 1.0,
            name: None,
        }
    }
}

impl GenOpts {
    fn blob_spec(&self) -> Result<SyntheticSpec> {
        Ok(SyntheticSpec::blobs(self.dim, self.classes, self.radius, self.sigma)?)
    }

    fn shifted_spec(&self) -> Result<SyntheticSpec> {
        let mut shift = vec![0.0; self.dim];
        shift[self.dim - 1] = self.shift * self.sigma;
        Ok(self.blob_spec()?.shifted(shift)?)
    }
}

const DATASETS_FILE: &str = "datasets.json";

/// Writes the requested synthetic dumps; returns their paths.
pub fn cmd_gen(ctx: &mut RunContext, opts: &GenOpts) -> Result<Vec<PathBuf>> {
    if opts.n == 0 || (opts.kind == GenKind::Desk && opts.n_train == 0) {
        return Err(HarnessError::Usage("sample count must be positive".into()));
    }
    if opts.dim == 0 {
        return Err(HarnessError::Usage("dim must be positive".into()));
    }
    let usage = |e: crate::dataio::DataError| HarnessError::Usage(e.to_string());
    let seed = ctx.seed;
    let noise_spec = || SyntheticSpec::noise(opts.dim, opts.noise_mean, opts.noise_std).map_err(usage);

    // (file name, kind, spec, seed, dataset)
    let mut jobs: Vec<(String, DatasetKind, SyntheticSpec, u64, Dataset)> = Vec::new();
    let named = |default: &str| opts.name.clone().unwrap_or_else(|| default.to_string());
    match opts.kind {
        GenKind::Blobs => {
            let spec = opts.blob_spec().map_err(to_usage)?;
            let d = gen_blobs(&spec, opts.n, seed)?;
            jobs.push((named("blobs"), DatasetKind::Inlier, spec, seed, d));
        }
        GenKind::Shifted => {
            let spec = opts.shifted_spec().map_err(to_usage)?;
            let d = gen_shifted(&spec, opts.n, seed)?;
            jobs.push((named("shifted"), DatasetKind::Outlier, spec, seed, d));
        }
        GenKind::Noise => {
            let spec = noise_spec()?;
            let d = gen_noise(opts.dim, opts.n, opts.noise_mean, opts.noise_std, seed)?;
            jobs.push((named("noise"), DatasetKind::Outlier, spec, seed, d));
        }
        GenKind::Desk => {
            let blobs = opts.blob_spec().map_err(to_usage)?;
            let shifted = opts.shifted_spec().map_err(to_usage)?;
            let noise = noise_spec()?;
            let s = |k: u64| seed.wrapping_add(k);
            let tr = gen_blobs(&blobs, opts.n_train, s(0))?;
            let te = gen_blobs(&blobs, opts.n, s(1))?;
            let sh = gen_shifted(&shifted, opts.n, s(2))?;
            let nz = gen_noise(opts.dim, opts.n, opts.noise_mean, opts.noise_std, s(3))?;
            jobs.push(("train".into(), DatasetKind::Inlier, blobs.clone(), s(0), tr));
            jobs.push(("test".into(), DatasetKind::Inlier, blobs, s(1), te));
            jobs.push(("shifted".into(), DatasetKind::Outlier, shifted, s(2), sh));
            jobs.push(("noise".into(), DatasetKind::Outlier, noise, s(3), nz));
        }
    }

    let manifest_path = ctx.path(DATASETS_FILE);
    let mut manifests: Vec<DatasetManifest> = match std::fs::read_to_string(&manifest_path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => Vec::new(),
    };
    let mut paths = Vec::new();
    for (name, kind, spec, seed, data) in jobs {
        let bytes = encode_dump(&data.to_records())?;
        paths.push(ctx.write(&format!("{name}.ooda"), &bytes)?);
        manifests.retain(|m| m.name != name);
        manifests.push(DatasetManifest {
            name,
            kind,
            source: DatasetSource::Synthetic { spec },
            seed: Some(seed),
            count: data.len(),
        });
    }
    let text = serde_json::to_string_pretty(&manifests).expect("plain struct") + "\n";
    ctx.write(DATASETS_FILE, text.as_bytes())?;
    Ok(paths)
}

fn to_usage(e: HarnessError) -> HarnessError {
    match e {
        HarnessError::Data(d) => HarnessError::Usage(d.to_string()),
        other => other,
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOpts {
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    pub hidden: Vec<usize>,
    pub schedule: TrainSchedule,
}

impl TrainOpts {
    /// Desk defaults: `in -> 128 -> 64 -> N`, 60 epochs, checkpoint every 3.
    pub fn desk(train_data: impl Into<PathBuf>, test_data: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            train_data: train_data.into(),
            test_data: test_data.into(),
            hidden: vec![128, 64],
            schedule: TrainSchedule::desk_default(seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint_files: Vec<PathBuf>,
    pub best_epoch: u32,
    pub best_test_accuracy: f64,
}

fn load_labeled(path: &Path) -> Result<Dataset> {
    match load_dump(path)? {
        Loaded::Raw(d) if d.labels.is_some() && !d.is_empty() => Ok(d),
        Loaded::Raw(d) if d.is_empty() => Err(HarnessError::Usage(format!(
            "{} holds no samples",
            path.display()
        ))),
        _ => Err(HarnessError::Usage(format!(
            "{} must be a labeled raw-input dump",
            path.display()
        ))),
    }
}

pub fn checkpoint_name(epoch: u32) -> String {
    format!("epoch_{epoch:04}.oodc")
}

pub const BEST_CHECKPOINT: &str = "best.oodc";

pub fn cmd_train(ctx: &mut RunContext, opts: &TrainOpts) -> Result<TrainSummary> {
    opts.schedule
        .validate()
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let tr = load_labeled(&opts.train_data)?;
    let te = load_labeled(&opts.test_data)?;
    let max_label = tr
        .labels
        .iter()
        .chain(te.labels.iter())
        .flatten()
        .copied()
        .max()
        .unwrap_or(0);
    let classes = max_label + 1;
    if classes < 2 {
        return Err(HarnessError::Usage("training data needs at least 2 classes".into()));
    }
    let spec = NetworkSpec::mlp(tr.dim(), &opts.hidden, classes, opts.schedule.seed)
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let out = train(
        &spec,
        tr.labeled().expect("checked"),
        te.labeled().expect("checked"),
        &opts.schedule,
    )?;

    let mut files = Vec::new();
    for ck in &out.periodic {
        files.push(ctx.write(&format!("checkpoints/{}", checkpoint_name(ck.epoch)), &ck.to_bytes())?);
    }
    files.push(ctx.write(&format!("checkpoints/{BEST_CHECKPOINT}"), &out.best.to_bytes())?);

    let mut log = String::from("epoch,loss,train_acc,test_acc\n");
    for e in &out.log {
        log.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.loss, e.train_accuracy, e.test_accuracy
        ));
    }
    ctx.write("training_log.csv", log.as_bytes())?;
    Ok(TrainSummary {
        checkpoint_files: files,
        best_epoch: out.best.epoch,
        best_test_accuracy: out.best.test_accuracy,
    })
}

// ---------------------------------------------------------------- shared

pub(crate) fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    require(path)?;
    Checkpoint::load(path).map_err(|e| HarnessError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

pub(crate) fn load_grids(path: Option<&Path>) -> Result<Grids> {
    match path {
        None => Ok(Grids::default()),
        Some(p) => {
            require(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Input {
                path: p.to_path_buf(),
                source: e.into(),
            })?;
            serde_json::from_str(&text)
                .map_err(|e| HarnessError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

pub(crate) fn load_config(path: &Path) -> Result<SupervisorConfig> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))
}

pub(crate) fn config_file(kind: SupervisorKind) -> String {
    format!("configs/{}_config.json", kind.name())
}

/// `key=value` pairs joined by `;`, safe inside a CSV cell.
pub(crate) fn config_label(c: &SupervisorConfig) -> String {
    match c {
        SupervisorConfig::Baseline => String::new(),
        SupervisorConfig::Odin(o) => format!("temperature={};epsilon={}", o.temperature, o.epsilon),
        SupervisorConfig::OpenMax(m) => {
            let mut s = format!("tail={};alpha={}", m.tail, m.alpha);
            if m.layer == ActivationLayer::Features {
                s.push_str(";layer=features");
            }
            s
        }
    }
}

/// A supervisor config with any per-model fitting already done.
pub(crate) enum Prepared {
    Baseline,
    Odin(OdinConfig),
    OpenMax(OpenMaxModel),
}

impl Prepared {
    pub(crate) fn new(config: &SupervisorConfig, train: Option<&[ActivationRecord]>) -> Result<Self> {
        Ok(match config {
            SupervisorConfig::Baseline => Self::Baseline,
            SupervisorConfig::Odin(c) => Self::Odin(*c),
            SupervisorConfig::OpenMax(c) => {
                let train = train.ok_or_else(|| {
                    HarnessError::Usage("openmax needs --train-data to fit class models".into())
                })?;
                Self::OpenMax(openmax_fit(train, *c)?)
            }
        })
    }

    pub(crate) fn supervisor<'a>(&'a self, params: Option<&'a NetworkParams>) -> Result<Supervisor<'a>> {
        Ok(match self {
            Self::Baseline => Supervisor::Baseline,
            Self::Odin(config) => Supervisor::Odin {
                params: params.ok_or_else(|| {
                    HarnessError::Usage("odin needs a --checkpoint and raw-input dumps".into())
                })?,
                config: *config,
            },
            Self::OpenMax(m) => Supervisor::OpenMax(m),
        })
    }
}

pub(crate) fn parse_ood_sets(ood: &[(String, PathBuf)]) -> Result<Vec<(String, Loaded)>> {
    if ood.is_empty() {
        return Err(HarnessError::Usage("at least one --ood NAME=PATH is required".into()));
    }
    let mut names: Vec<&str> = ood.iter().map(|(n, _)| n.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(HarnessError::Usage("OOD set names must be unique".into()));
    }
    ood.iter()
        .map(|(n, p)| Ok((n.clone(), load_dump(p)?)))
        .collect()
}

// ---------------------------------------------------------------- gridsearch

#[derive(Debug, Clone, PartialEq)]
pub struct GridOpts {
    pub checkpoint: PathBuf,
    pub train_data: Option<PathBuf>,
    pub inliers: PathBuf,
    pub ood: Vec<(String, PathBuf)>,
    pub supervisors: Vec<SupervisorKind>,
    pub grid: Option<PathBuf>,
}

/// Runs one search per supervisor on one checkpoint and writes
/// `configs/<supervisor>_config.json` plus the full grid table as CSV.
pub fn cmd_gridsearch(ctx: &mut RunContext, opts: &GridOpts) -> Result<Vec<(SupervisorKind, GridResult)>> {
    let ck = load_checkpoint(&opts.checkpoint)?;
    let grids = load_grids(opts.grid.as_deref())?;
    let inliers = load_dump(&opts.inliers)?;
    let ood = parse_ood_sets(&opts.ood)?;
    let train = opts.train_data.as_deref().map(load_dump).transpose()?;
    search_and_write(ctx, &ck.params, train.as_ref(), &inliers, &ood, &opts.supervisors, &grids)
}

pub(crate) fn search_and_write(
    ctx: &mut RunContext,
    params: &NetworkParams,
    train: Option<&Loaded>,
    inliers: &Loaded,
    ood: &[(String, Loaded)],
    kinds: &[SupervisorKind],
    grids: &Grids,
) -> Result<Vec<(SupervisorKind, GridResult)>> {
    let inlier_samples = inliers.samples(Some(params))?;
    let ood_samples: Vec<(String, Vec<Sample>)> = ood
        .iter()
        .map(|(n, l)| Ok((n.clone(), l.samples(Some(params))?)))
        .collect::<Result<_>>()?;
    let train_records = match train {
        Some(t) => t.records(Some(params))?,
        None if kinds.contains(&SupervisorKind::OpenMax) => {
            return Err(HarnessError::Usage(
                "openmax grid search needs --train-data".into(),
            ))
        }
        None => Vec::new(),
    };
    let gctx = GridContext {
        params,
        train: &train_records,
        inliers: &inlier_samples,
        ood_sets: &ood_samples,
    };
    let mut results = Vec::new();
    for &kind in kinds {
        let result = grid_search(kind, &gctx, grids)?;
        let json = serde_json::to_string_pretty(&result.config).expect("plain enum") + "\n";
        ctx.write(&config_file(kind), json.as_bytes())?;
        if !result.rows.is_empty() {
            let mut csv = String::from("config,mean_auroc");
            for (name, _) in &ood_samples {
                csv.push_str(&format!(",auroc_{name}"));
            }
            csv.push_str(",error\n");
            for row in &result.rows {
                csv.push_str(&config_label(&row.config));
                csv.push(',');
                csv.push_str(&row.mean_auroc.map_or("NA".into(), |m| m.to_string()));
                for i in 0..ood_samples.len() {
                    csv.push(',');
                    csv.push_str(&row.aurocs.get(i).map_or("NA".into(), |a| a.to_string()));
                }
                csv.push(',');
                csv.push_str(&row.error.as_deref().unwrap_or("").replace([',', '\n'], ";"));
                csv.push('\n');
            }
            ctx.write(&format!("configs/{}_grid.csv", kind.name()), csv.as_bytes())?;
        }
        results.push((kind, result));
    }
    Ok(results)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOpts {
    pub checkpoint: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub inliers: PathBuf,
    pub outliers: PathBuf,
    pub ood_name: Option<String>,
    pub supervisor: SupervisorKind,
    pub config: Option<PathBuf>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

/// Scores one (model, supervisor, OOD set) cell.
pub(crate) fn evaluate_cell(
    prepared: &Prepared,
    params: Option<&NetworkParams>,
    reference_accuracy: f64,
    inliers: &[Sample],
    outliers: &[Sample],
) -> Result<MetricSummary> {
    let sup = prepared.supervisor(params)?;
    Ok(evaluate(&sup, reference_accuracy, inliers, outliers)?)
}

pub fn cmd_evaluate(ctx: &mut RunContext, opts: &EvaluateOpts) -> Result<EvaluationReport> {
    let ck = opts.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let params = ck.as_ref().map(|c| &c.params);
    let config = match (&opts.config, opts.supervisor) {
        (Some(p), _) => load_config(p)?,
        (None, SupervisorKind::Baseline) => SupervisorConfig::Baseline,
        (None, k) => {
            return Err(HarnessError::Usage(format!(
                "{k} needs --config (run gridsearch first)"
            )))
        }
    };
    if config.kind() != opts.supervisor {
        return Err(HarnessError::Usage(format!(
            "config is for {}, not {}",
            config.kind(),
            opts.supervisor
        )));
    }
    let inliers = load_dump(&opts.inliers)?.samples(params)?;
    let outliers = load_dump(&opts.outliers)?.samples(params)?;
    let train = match (&opts.train_data, opts.supervisor) {
        (Some(p), SupervisorKind::OpenMax) => Some(load_dump(p)?.records(params)?),
        _ => None,
    };
    let prepared = Prepared::new(&config, train.as_deref())?;

    let reference = match &ck {
        Some(c) => c.test_accuracy,
        None => labeled_accuracy(&inliers).ok_or_else(|| {
            HarnessError::Usage("no checkpoint and no labeled inliers to take test accuracy from".into())
        })?,
    };
    let m = evaluate_cell(&prepared, params, reference, &inliers, &outliers)?;
    let model_id = stem(opts.checkpoint.as_deref().unwrap_or(&opts.inliers));
    let ood_name = opts.ood_name.clone().unwrap_or_else(|| stem(&opts.outliers));
    let sup = prepared.supervisor(params)?;
    let report = EvaluationReport::new(
        model_id.clone(),
        ck.as_ref().map(|c| c.epoch),
        reference,
        &sup,
        ood_name.clone(),
        m,
    );
    let json = serde_json::to_string_pretty(&report).expect("plain struct") + "\n";
    ctx.write(
        &format!("reports/{model_id}_{}_{ood_name}.json", opts.supervisor.name()),
        json.as_bytes(),
    )?;
    Ok(report)
}

pub(crate) fn augmentation_from_flag(flip: bool) -> Augmentation {
    if flip {
        Augmentation::Flip
    } else {
        Augmentation::None
    }
}
