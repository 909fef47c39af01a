use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::commands::augmentation_from_flag;
use super::{
    cmd_evaluate, cmd_gen, cmd_gridsearch, cmd_sweep, cmd_train, f4, text_table, EvaluateOpts,
    GenKind, GenOpts, GridOpts, HarnessError, Result, RunContext, SweepOpts, TrainOpts,
};
use crate::netengine::TrainSchedule;
use crate::supervisors::{SupervisorConfig, SupervisorKind};

#[derive(Debug, Parser)]
#[command(name = "oodbench", version, about = "Benchmark OOD supervisors across training checkpoints")]
pub struct Cli {
    /// Seed for data generation, weight init and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for scoring (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write periodic plus best checkpoints.
    Train(TrainArgs),
    /// Generate synthetic datasets as raw-input dumps.
    Gen(GenArgs),
    /// Pick one supervisor config per model by mean AUROC.
    Gridsearch(GridArgs),
    /// Score one checkpoint with one supervisor against one OOD set.
    Evaluate(EvaluateArgs),
    /// Evaluate every checkpoint x supervisor x OOD set into sweep.csv.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train_data: PathBuf,
    #[arg(long)]
    pub test_data: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub epochs: u32,
    #[arg(long, default_value_t = 3)]
    pub checkpoint_every: u32,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Learning-rate drop points as fractions of the run.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.75])]
    pub drops: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub drop_factor: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![128, 64])]
    pub hidden: Vec<usize>,
    /// Randomly reverse feature vectors during training.
    #[arg(long)]
    pub flip: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKindArg {
    Blobs,
    Shifted,
    Noise,
    Desk,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub kind: GenKindArg,
    /// Samples per dump (test and outlier sets for `desk`).
    #[arg(long, default_value_t = 1500)]
    pub n: usize,
    /// Training samples for `desk`.
    #[arg(long, default_value_t = 3000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Distance of each class mean from the origin.
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Outlier shift in units of sigma.
    #[arg(long, default_value_t = 3.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    /// File stem for single-dump kinds.
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_ood(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn parse_supervisor(s: &str) -> std::result::Result<SupervisorKind, String> {
    SupervisorKind::parse(s).ok_or_else(|| format!("unknown supervisor {s:?} (baseline, odin, openmax)"))
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Training dump used to fit OpenMax class models.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub inliers: PathBuf,
    /// Outlier set as NAME=PATH; repeatable.
    #[arg(long, value_parser = parse_ood, required = true)]
    pub ood: Vec<(String, PathBuf)>,
    #[arg(long, value_parser = parse_supervisor, value_delimiter = ',', default_value = "baseline,odin,openmax")]
    pub supervisor: Vec<SupervisorKind>,
    /// JSON file overriding the default parameter grids.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Omit to score exported activation dumps directly.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub inliers: PathBuf,
    #[arg(long)]
    pub outliers: PathBuf,
    /// Name of the OOD set in the report (default: outlier file stem).
    #[arg(long)]
    pub ood_name: Option<String>,
    #[arg(long, value_parser = parse_supervisor)]
    pub supervisor: SupervisorKind,
    /// Config JSON written by gridsearch.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub checkpoints: PathBuf,
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub inliers: PathBuf,
    #[arg(long, value_parser = parse_ood, required = true)]
    pub ood: Vec<(String, PathBuf)>,
    #[arg(long, value_parser = parse_supervisor, value_delimiter = ',', default_value = "baseline,odin,openmax")]
    pub supervisor: Vec<SupervisorKind>,
    /// Output dir of a gridsearch run (holding configs/).
    #[arg(long)]
    pub configs: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

fn config_summary(c: &SupervisorConfig) -> String {
    match c {
        SupervisorConfig::Baseline => "-".into(),
        SupervisorConfig::Odin(o) => format!("T={} eps={}", o.temperature, o.epsilon),
        SupervisorConfig::OpenMax(m) => format!("tail={} alpha={}", m.tail, m.alpha),
    }
}

fn execute(cli: Cli, ctx: &mut RunContext) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let schedule = TrainSchedule {
                total_epochs: a.epochs,
                batch_size: a.batch_size,
                base_lr: a.lr,
                drop_epochs: a.drops,
                drop_factor: a.drop_factor,
                momentum: a.momentum,
                checkpoint_every: a.checkpoint_every,
                seed: cli.seed,
                augmentation: augmentation_from_flag(a.flip),
            };
            let opts = TrainOpts {
                train_data: a.train_data,
                test_data: a.test_data,
                hidden: a.hidden,
                schedule,
            };
            let s = cmd_train(ctx, &opts)?;
            println!(
                "wrote {} checkpoints; best epoch {} test accuracy {}",
                s.checkpoint_files.len(),
                s.best_epoch,
                f4(s.best_test_accuracy)
            );
        }
        Command::Gen(a) => {
            let opts = GenOpts {
                kind: match a.kind {
                    GenKindArg::Blobs => GenKind::Blobs,
                    GenKindArg::Shifted => GenKind::Shifted,
                    GenKindArg::Noise => GenKind::Noise,
                    GenKindArg::Desk => GenKind::Desk,
                },
                n: a.n,
                n_train: a.n_train,
                dim: a.dim,
                classes: a.classes,
                radius: a.radius,
                sigma: a.sigma,
                shift: a.shift,
                noise_mean: a.noise_mean,
                noise_std: a.noise_std,
                name: a.name,
            };
            for p in cmd_gen(ctx, &opts)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Gridsearch(a) => {
            let opts = GridOpts {
                checkpoint: a.checkpoint,
                train_data: a.train_data,
                inliers: a.inliers,
                ood: a.ood,
                supervisors: a.supervisor,
                grid: a.grid,
            };
            let results = cmd_gridsearch(ctx, &opts)?;
            let rows: Vec<Vec<String>> = results
                .iter()
                .map(|(k, r)| {
                    let best = r
                        .rows
                        .iter()
                        .find(|row| row.config == r.config)
                        .and_then(|row| row.mean_auroc);
                    vec![
                        k.to_string(),
                        config_summary(&r.config),
                        r.rows.len().to_string(),
                        best.map_or("-".into(), f4),
                    ]
                })
                .collect();
            print!("{}", text_table(&["supervisor", "config", "grid_rows", "mean_auroc"], &rows));
        }
        Command::Evaluate(a) => {
            let opts = EvaluateOpts {
                checkpoint: a.checkpoint,
                train_data: a.train_data,
                inliers: a.inliers,
                outliers: a.outliers,
                ood_name: a.ood_name,
                supervisor: a.supervisor,
                config: a.config,
            };
            let r = cmd_evaluate(ctx, &opts)?;
            let row = vec![
                r.supervisor.clone(),
                r.ood_set.clone(),
                f4(r.auroc),
                f4(r.fpr_at_95_tpr),
                f4(r.cbpl),
                f4(r.cov10),
            ];
            print!(
                "{}",
                text_table(&["supervisor", "ood_set", "auroc", "fpr95", "cbpl", "cov10"], &[row])
            );
        }
        Command::Sweep(a) => {
            let opts = SweepOpts {
                checkpoints: a.checkpoints,
                train_data: a.train_data,
                inliers: a.inliers,
                ood: a.ood,
                supervisors: a.supervisor,
                configs: a.configs,
                grid: a.grid,
            };
            let rows = cmd_sweep(ctx, &opts)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let m = r.metrics.expect("successful sweep");
                    vec![
                        r.epoch.to_string(),
                        f4(r.test_accuracy),
                        r.supervisor.to_string(),
                        r.ood_set.clone(),
                        f4(m.auroc),
                        f4(m.fpr_at_95_tpr),
                        f4(m.cbpl),
                        f4(m.cov10),
                    ]
                })
                .collect();
            print!(
                "{}",
                text_table(
                    &["epoch", "test_acc", "supervisor", "ood_set", "auroc", "fpr95", "cbpl", "cov10"],
                    &table
                )
            );
        }
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Train(_) => "train",
        Command::Gen(_) => "gen",
        Command::Gridsearch(_) => "gridsearch",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if n == 0 || built.is_err() {
            eprintln!("error: --threads must be a positive number");
            return super::EXIT_USAGE;
        }
    }
    let mut ctx = match RunContext::new(&cli.out, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let name = command_name(&cli.command);
    let result = execute(cli, &mut ctx);
    let finished = if ctx.artifacts().is_empty() {
        Ok(())
    } else {
        ctx.finish(name)
    };
    match result.and(finished) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_from_env() -> i32 {
    run(Cli::parse())
}

impl From<clap::Error> for HarnessError {
    fn from(e: clap::Error) -> Self {
        HarnessError::Usage(e.to_string())
    }
}
