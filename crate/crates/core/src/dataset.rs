//! From feature frames to model-ready sequences and leave-one-subject-out
//! folds.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureFrame, NUM_FEATURES};
use crate::seed::rng_from;
use crate::signal::{format_sample, Label};

pub const STRESSED: u8 = 1;
pub const NOT_STRESSED: u8 = 0;

/// Floor applied to feature standard deviations before scaling.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("label {0} has no binary mapping")]
    UnmappableLabel(Label),
    #[error("class distribution is degenerate: {positives} positives, {negatives} negatives")]
    DegenerateClassDistribution { positives: usize, negatives: usize },
    #[error("labeled fraction {fraction} leaves class {class} without labeled samples")]
    EmptyLabeledSet { fraction: f64, class: u8 },
    #[error("labeled fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("fold construction needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("sequence file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Binary target for a raw condition label. BASELINE maps to `None`: it is
/// only used for normalization.
pub fn map_binary_label(label: Label) -> Result<Option<u8>, DatasetError> {
    match label {
        Label::Stress => Ok(Some(STRESSED)),
        Label::Amusement | Label::Meditation => Ok(Some(NOT_STRESSED)),
        Label::Baseline => Ok(None),
        Label::Undefined | Label::Other(_) => Err(DatasetError::UnmappableLabel(label)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub steps: usize,
    /// Frames below this coverage break a run.
    pub min_coverage: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig { steps: 10, min_coverage: 0.9 }
    }
}

/// `steps` consecutive frames of one subject, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    /// Row-major `steps × 30`.
    pub inputs: Vec<f64>,
    pub label: u8,
    pub subject_id: String,
    /// `false` hides the label from training; it is still kept for scoring.
    pub labeled: bool,
    /// Window index of the final frame.
    pub window_index: usize,
}

impl SequenceSample {
    pub fn steps(&self) -> usize {
        self.inputs.len() / NUM_FEATURES
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.inputs[t * NUM_FEATURES..(t + 1) * NUM_FEATURES]
    }
}

/// Sliding groups of `steps` consecutive frames whose binary labels exist and
/// agree. Low-coverage or unmappable frames end the current run.
pub fn build_sequences(frames: &[FeatureFrame], subject_id: &str, cfg: SequenceConfig) -> Vec<SequenceSample> {
    let mut out = Vec::new();
    let mut run_start = 0;
    let mut run_label = None;
    for (i, frame) in frames.iter().enumerate() {
        let label = match map_binary_label(frame.raw_label) {
            Ok(Some(l)) if frame.coverage >= cfg.min_coverage => Some(l),
            _ => None,
        };
        if label.is_none() || label != run_label {
            run_start = i;
            run_label = label;
        }
        let Some(label) = label else { continue };
        if i + 1 - run_start >= cfg.steps {
            let first = i + 1 - cfg.steps;
            let inputs = frames[first..=i].iter().flat_map(|f| f.features.iter().copied()).collect();
            out.push(SequenceSample {
                inputs,
                label,
                subject_id: subject_id.to_string(),
                labeled: true,
                window_index: i,
            });
        }
    }
    out
}

fn class_counts(samples: &[SequenceSample]) -> (usize, usize) {
    let pos = samples.iter().filter(|s| s.label == STRESSED).count();
    (pos, samples.len() - pos)
}

/// Drops randomly chosen samples of the larger class, without replacement,
/// until both classes have equal counts. Input order is preserved.
///
/// With the usual negative-heavy data every positive survives. If positives
/// outnumber negatives the positives are subsampled instead.
pub fn rebalance(samples: Vec<SequenceSample>, seed: u64) -> Result<Vec<SequenceSample>, DatasetError> {
    let (positives, negatives) = class_counts(&samples);
    if positives == 0 || negatives == 0 {
        return Err(DatasetError::DegenerateClassDistribution { positives, negatives });
    }
    let (major, major_count, target) = if negatives >= positives {
        (NOT_STRESSED, negatives, positives)
    } else {
        (STRESSED, positives, negatives)
    };
    let mut rng = rng_from(seed, &[0x7265_6261]);
    let mut keep = vec![false; major_count];
    for k in index::sample(&mut rng, major_count, target) {
        keep[k] = true;
    }
    let mut k = 0;
    Ok(samples
        .into_iter()
        .filter(|s| {
            if s.label != major {
                return true;
            }
            k += 1;
            keep[k - 1]
        })
        .collect())
}

/// Marks a stratified `floor(fraction × class count)` of each class as
/// labeled and the rest as unlabeled. Labels themselves are untouched.
pub fn split_labeled(
    mut samples: Vec<SequenceSample>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<SequenceSample>, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let mut rng = rng_from(seed, &[0x7370_6c69]);
    for class in [NOT_STRESSED, STRESSED] {
        let members: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == class).collect();
        let n_labeled = (fraction * members.len() as f64).floor() as usize;
        if n_labeled == 0 {
            return Err(DatasetError::EmptyLabeledSet { fraction, class });
        }
        let mut chosen = vec![false; members.len()];
        for k in index::sample(&mut rng, members.len(), n_labeled) {
            chosen[k] = true;
        }
        for (&i, &c) in members.iter().zip(&chosen) {
            samples[i].labeled = c;
        }
    }
    Ok(samples)
}

/// Per-feature affine scaling fitted on training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer { mean: vec![0.0; NUM_FEATURES], std: vec![1.0; NUM_FEATURES] }
    }

    /// Fits over every time step of every sample. Stored std is floored at
    /// [`STD_FLOOR`].
    pub fn fit(samples: &[SequenceSample]) -> Self {
        let mut sum = vec![0.0; NUM_FEATURES];
        let mut lo = vec![f64::INFINITY; NUM_FEATURES];
        let mut hi = vec![f64::NEG_INFINITY; NUM_FEATURES];
        let mut rows = 0usize;
        for s in samples {
            for row in s.inputs.chunks_exact(NUM_FEATURES) {
                for (c, &v) in row.iter().enumerate() {
                    sum[c] += v;
                    lo[c] = lo[c].min(v);
                    hi[c] = hi[c].max(v);
                }
                rows += 1;
            }
        }
        let n = rows.max(1) as f64;
        // Constant columns take their value as mean so they map to exact zeros.
        let mean: Vec<f64> = (0..NUM_FEATURES)
            .map(|c| if lo[c] == hi[c] { lo[c] } else { sum[c] / n })
            .collect();
        let mut sq = vec![0.0; NUM_FEATURES];
        for s in samples {
            for row in s.inputs.chunks_exact(NUM_FEATURES) {
                for ((a, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *a += (v - m) * (v - m);
                }
            }
        }
        let std = sq.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, sample: &mut SequenceSample) {
        for row in sample.inputs.chunks_exact_mut(NUM_FEATURES) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldDataset {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub standardizer: Standardizer,
    pub test_subject: String,
}

/// Fits the standardizer on `train` and rescales both splits with it.
pub fn standardize_fit_apply(mut fold: FoldDataset) -> FoldDataset {
    let st = Standardizer::fit(&fold.train);
    for s in fold.train.iter_mut().chain(fold.test.iter_mut()) {
        st.apply(s);
    }
    fold.standardizer = st;
    fold
}

/// Sequences of one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectSequences {
    pub subject_id: String,
    pub samples: Vec<SequenceSample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOptions {
    pub standardize: bool,
}

impl Default for FoldOptions {
    fn default() -> Self {
        FoldOptions { standardize: true }
    }
}

/// Fold holding out `subjects[test_index]`: the rebalanced union of every
/// other subject trains, the held-out subject's natural distribution tests.
pub fn make_fold(
    subjects: &[SubjectSequences],
    test_index: usize,
    seed: u64,
    opts: FoldOptions,
) -> Result<FoldDataset, DatasetError> {
    if subjects.len() < 2 {
        return Err(DatasetError::TooFewSubjects(subjects.len()));
    }
    let train: Vec<SequenceSample> = subjects
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != test_index)
        .flat_map(|(_, s)| s.samples.iter().cloned())
        .collect();
    if train.is_empty() {
        return Err(DatasetError::EmptyTrainSet);
    }
    let held_out = &subjects[test_index];
    let fold = FoldDataset {
        train: rebalance(train, seed)?,
        test: held_out.samples.clone(),
        standardizer: Standardizer::identity(),
        test_subject: held_out.subject_id.clone(),
    };
    Ok(if opts.standardize { standardize_fit_apply(fold) } else { fold })
}

/// One fold per subject. Fold `f` rebalances with a seed derived from
/// `(seed, f)`.
pub fn make_loso_folds(
    subjects: &[SubjectSequences],
    seed: u64,
    opts: FoldOptions,
) -> Result<Vec<FoldDataset>, DatasetError> {
    (0..subjects.len())
        .map(|f| make_fold(subjects, f, crate::seed::derive_seed(seed, &[f as u64]), opts))
        .collect()
}

fn sequences_header(width: usize) -> String {
    let mut h = String::from("subject,window_index,label,labeled");
    for i in 0..width {
        h.push_str(&format!(",x{i:03}"));
    }
    h
}

/// CSV dump: `subject,window_index,label,labeled,x000..`, one row per sample.
pub fn write_sequences_csv(samples: &[SequenceSample], path: &Path) -> Result<(), DatasetError> {
    let width = samples.first().map_or(0, |s| s.inputs.len());
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", sequences_header(width))?;
    for s in samples {
        write!(w, "{},{},{},{}", s.subject_id, s.window_index, s.label, u8::from(s.labeled))?;
        for v in &s.inputs {
            write!(w, ",{}", format_sample(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sequences_csv(path: &Path) -> Result<Vec<SequenceSample>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| DatasetError::Format("empty file".into()))?;
    let width = header.split(',').count().saturating_sub(4);
    if header != sequences_header(width) {
        return Err(DatasetError::Format(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let bad = || DatasetError::Format(format!("{}: malformed row {}", path.display(), n + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 + width {
                return Err(bad());
            }
            Ok(SequenceSample {
                subject_id: cols[0].to_string(),
                window_index: cols[1].parse().map_err(|_| bad())?,
                label: cols[2].parse().ok().filter(|l| *l <= 1).ok_or_else(bad)?,
                labeled: cols[3] == "1",
                inputs: cols[4..].iter().map(|v| v.parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}
