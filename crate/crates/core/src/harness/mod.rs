//! Leave-one-subject-out evaluation with repeats.
//!
//! Every (repeat, fold) cell is independent: its seed is derived from the
//! run seed and the cell coordinates, so results do not depend on how many
//! worker threads run them or in what order.

mod metrics;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{make_fold, split_labeled, DatasetError, FoldOptions, SubjectSequences};
use crate::models::{train_sgan, train_supervised, ModelError, NetShape, SganLosses, SganNet, SupervisedNet, TrainConfig};
use crate::nn::{checkpoint::write_checkpoint, ParamStore};
use crate::seed::derive_seed;

pub use metrics::{auc, confusion, mean_bce, precision_recall_f1, Confusion, MetricError, PrecisionRecall, THRESHOLD};
pub use report::{parse_report_csv, AggregateTable, MetricRow, MetricsReport, SubjectRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Supervised,
    Sgan,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Supervised => "supervised",
            ModelKind::Sgan => "sgan",
        }
    }

    pub fn default_train_config(self) -> TrainConfig {
        match self {
            ModelKind::Supervised => TrainConfig::supervised(),
            ModelKind::Sgan => TrainConfig::sgan(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supervised" => Ok(ModelKind::Supervised),
            "sgan" => Ok(ModelKind::Sgan),
            other => Err(format!("unknown model {other:?} (expected supervised or sgan)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LosoConfig {
    pub shape: NetShape,
    pub train: TrainConfig,
    pub fold: FoldOptions,
}

impl LosoConfig {
    pub fn for_model(kind: ModelKind) -> Self {
        LosoConfig { shape: NetShape::default(), train: kind.default_train_config(), fold: FoldOptions::default() }
    }
}

/// Per-epoch training losses of one cell.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainingLog {
    Supervised(Vec<f64>),
    Sgan(Vec<SganLosses>),
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            TrainingLog::Supervised(losses) => {
                out.push_str("epoch,loss\n");
                for (e, l) in losses.iter().enumerate() {
                    out.push_str(&format!("{},{l}\n", e + 1));
                }
            }
            TrainingLog::Sgan(losses) => {
                out.push_str("epoch,c_loss,d_loss_real,d_loss_fake,g_loss\n");
                for (e, l) in losses.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{},{}\n", e + 1, l.c_loss, l.d_loss_real, l.d_loss_fake, l.g_loss));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CellOutput {
    pub repeat: usize,
    pub fold: usize,
    pub report: MetricsReport,
    pub log: TrainingLog,
    pub params: ParamStore,
}

/// Builds fold `fold` with the seed of cell `(repeat, fold)`, trains a fresh
/// model and evaluates it on the held-out subject.
pub fn run_cell(
    kind: ModelKind,
    subjects: &[SubjectSequences],
    cfg: &LosoConfig,
    seed: u64,
    repeat: usize,
    fold: usize,
) -> Result<CellOutput, HarnessError> {
    let cell_seed = derive_seed(seed, &[repeat as u64, fold as u64]);
    let mut data = make_fold(subjects, fold, derive_seed(cell_seed, &[1]), cfg.fold)?;
    if kind == ModelKind::Sgan || cfg.train.labeled_fraction < 1.0 {
        data.train = split_labeled(data.train, cfg.train.labeled_fraction, derive_seed(cell_seed, &[2]))?;
    }
    let train_cfg = TrainConfig { seed: derive_seed(cell_seed, &[3]), ..cfg.train };
    let init_seed = derive_seed(cell_seed, &[4]);
    let labels: Vec<u8> = data.test.iter().map(|s| s.label).collect();
    let (preds, log, params) = match kind {
        ModelKind::Supervised => {
            let (net, trace) = train_supervised(SupervisedNet::new(cfg.shape, &train_cfg, init_seed), &data.train, &train_cfg)?;
            (net.predict(&data.test).map_err(ModelError::from)?, TrainingLog::Supervised(trace), net.store)
        }
        ModelKind::Sgan => {
            let (net, trace) = train_sgan(SganNet::new(cfg.shape, &train_cfg, init_seed), &data.train, &train_cfg)?;
            (net.predict(&data.test).map_err(ModelError::from)?, TrainingLog::Sgan(trace), net.store)
        }
    };
    let report = MetricsReport::evaluate(&data.test_subject, repeat, &preds, &labels)?;
    Ok(CellOutput { repeat, fold, report, log, params })
}

/// Receives finished cells. Calls are serialized by the harness.
pub trait CellSink: Send {
    /// A previously recorded report for the cell, if any.
    fn lookup(&self, _repeat: usize, _fold: usize) -> Option<MetricsReport> {
        None
    }

    fn record(&mut self, cell: &CellOutput) -> Result<(), HarnessError>;
}

/// Keeps nothing.
pub struct NullSink;

impl CellSink for NullSink {
    fn record(&mut self, _cell: &CellOutput) -> Result<(), HarnessError> {
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    config_hash: String,
    report: MetricsReport,
}

/// Writes `cells/`, `logs/` and `checkpoints/` under `root`, one file per
/// cell, and resumes from cell files carrying the same config hash.
pub struct DirSink {
    root: PathBuf,
    config_hash: String,
}

impl DirSink {
    pub fn new(root: &Path, config_hash: impl Into<String>) -> Result<Self, HarnessError> {
        for sub in ["cells", "logs", "checkpoints"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|source| HarnessError::Io { path: p, source })?;
        }
        Ok(DirSink { root: root.to_path_buf(), config_hash: config_hash.into() })
    }

    fn stem(repeat: usize, fold: usize) -> String {
        format!("r{repeat:03}_f{fold:03}")
    }

    pub fn cell_path(&self, repeat: usize, fold: usize) -> PathBuf {
        self.root.join("cells").join(format!("{}.json", Self::stem(repeat, fold)))
    }

    fn write(path: PathBuf, bytes: &[u8]) -> Result<(), HarnessError> {
        // Write-then-rename so an interrupted run never leaves a truncated cell.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(|source| HarnessError::Io { path: tmp.clone(), source })?;
        fs::rename(&tmp, &path).map_err(|source| HarnessError::Io { path, source })
    }
}

impl CellSink for DirSink {
    fn lookup(&self, repeat: usize, fold: usize) -> Option<MetricsReport> {
        let text = fs::read_to_string(self.cell_path(repeat, fold)).ok()?;
        let cell: CellFile = serde_json::from_str(&text).ok()?;
        (cell.config_hash == self.config_hash).then_some(cell.report)
    }

    fn record(&mut self, cell: &CellOutput) -> Result<(), HarnessError> {
        let stem = Self::stem(cell.repeat, cell.fold);
        Self::write(self.root.join("logs").join(format!("{stem}.csv")), cell.log.to_csv().as_bytes())?;
        let mut ckpt = Vec::new();
        write_checkpoint(&cell.params, &mut ckpt).map_err(ModelError::from)?;
        Self::write(self.root.join("checkpoints").join(format!("{stem}.ckpt")), &ckpt)?;
        let json = serde_json::to_string_pretty(&CellFile { config_hash: self.config_hash.clone(), report: cell.report.clone() })
            .expect("report serializes");
        Self::write(self.cell_path(cell.repeat, cell.fold), json.as_bytes())
    }
}

/// Runs `repeats × subjects.len()` cells on `jobs` worker threads.
pub fn run_loso(
    kind: ModelKind,
    subjects: &[SubjectSequences],
    cfg: &LosoConfig,
    repeats: usize,
    seed: u64,
    jobs: usize,
) -> Result<AggregateTable, HarnessError> {
    run_loso_with(kind, subjects, cfg, repeats, seed, jobs, &mut NullSink)
}

/// [`run_loso`] reporting every finished cell to `sink`, skipping cells the
/// sink already holds.
pub fn run_loso_with(
    kind: ModelKind,
    subjects: &[SubjectSequences],
    cfg: &LosoConfig,
    repeats: usize,
    seed: u64,
    jobs: usize,
    sink: &mut dyn CellSink,
) -> Result<AggregateTable, HarnessError> {
    if subjects.len() < 2 {
        return Err(DatasetError::TooFewSubjects(subjects.len()).into());
    }
    if repeats == 0 || jobs == 0 {
        return Err(HarnessError::InvalidArgument("repeats and jobs must be positive".into()));
    }
    cfg.train.validate()?;
    let cells: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..subjects.len()).map(move |f| (r, f))).collect();
    let mut done: Vec<Option<MetricsReport>> = cells.iter().map(|&(r, f)| sink.lookup(r, f)).collect();
    let todo: Vec<usize> = (0..cells.len()).filter(|&i| done[i].is_none()).collect();

    let sink = Mutex::new(sink);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::InvalidArgument(format!("thread pool: {e}")))?;
    let fresh: Vec<Result<(usize, MetricsReport), HarnessError>> = pool.install(|| {
        todo.par_iter()
            .map(|&i| {
                let (r, f) = cells[i];
                let out = run_cell(kind, subjects, cfg, seed, r, f)?;
                sink.lock().expect("sink lock").record(&out)?;
                Ok((i, out.report))
            })
            .collect()
    });
    for res in fresh {
        let (i, report) = res?;
        done[i] = Some(report);
    }
    let reports: Vec<MetricsReport> = done.into_iter().map(|r| r.expect("every cell finished")).collect();
    Ok(AggregateTable::from_reports(reports, repeats))
}
