//! Dataset-level plumbing: preparation with an on-disk cache and the
//! summary tables behind the label, sample-count and histogram plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{build_sequences, read_sequences_csv, write_sequences_csv, DatasetError, SequenceConfig, SequenceSample, SubjectSequences};
use crate::features::{baseline_normalize, extract_frames, write_frames_csv, FeatureError, FeatureFrame, WindowSpec};
use crate::signal::{list_subject_dirs, load_subject, ChannelId, Label, SignalError, SubjectRecording};

pub const HIST_BINS: usize = 50;

/// Bumped whenever the prepared file layout changes.
const CACHE_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no subjects found under {0}")]
    NoSubjects(PathBuf),
    #[error("{subject}: {source}")]
    Subject { subject: String, source: Box<PipelineError> },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrepConfig {
    pub window: WindowSpec,
    pub sequence: SequenceConfig,
}

impl PrepConfig {
    /// Hex SHA-256 of every setting that influences prepared output.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "format={CACHE_FORMAT};window_length={};window_step={};steps={};min_coverage={:?}",
            self.window.length(),
            self.window.step(),
            self.sequence.steps,
            self.sequence.min_coverage,
        );
        sha256_hex(canonical.as_bytes())
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Baseline normalization, frame extraction and sequence building for one
/// recording.
pub fn prepare_recording(rec: &SubjectRecording, cfg: &PrepConfig) -> Result<(Vec<FeatureFrame>, Vec<SequenceSample>), FeatureError> {
    let normalized = baseline_normalize(rec)?;
    let frames = extract_frames(&normalized, cfg.window)?;
    let sequences = build_sequences(&frames, rec.subject_id(), cfg.sequence);
    Ok((frames, sequences))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSubject {
    pub subject_id: String,
    pub frame_count: usize,
    pub sequence_count: usize,
    pub cache_hit: bool,
}

/// Directory holding prepared files for `cfg` under `cache_root`.
pub fn cache_dir(cache_root: &Path, cfg: &PrepConfig) -> PathBuf {
    cache_root.join(&cfg.hash()[..16])
}

/// Prepares every subject under `data_root` into
/// `cache_dir(cache_root, cfg)/<subject>/{frames,sequences}.csv`. Subjects
/// whose files already exist for the same configuration are skipped.
pub fn prepare_dataset(data_root: &Path, cache_root: &Path, cfg: &PrepConfig) -> Result<Vec<PreparedSubject>, PipelineError> {
    let dirs = list_subject_dirs(data_root)?;
    if dirs.is_empty() {
        return Err(PipelineError::NoSubjects(data_root.to_path_buf()));
    }
    let out_root = cache_dir(cache_root, cfg);
    fs::create_dir_all(&out_root).map_err(io_err(&out_root))?;
    let mut done = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let subject = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let wrap = |e: PipelineError| PipelineError::Subject { subject: subject.clone(), source: Box::new(e) };
        let target = out_root.join(&subject);
        let frames_path = target.join("frames.csv");
        let seq_path = target.join("sequences.csv");
        let marker = target.join("complete");
        if marker.is_file() {
            let text = fs::read_to_string(&marker).map_err(io_err(&marker)).map_err(wrap)?;
            let mut counts = text.split_whitespace().filter_map(|t| t.parse::<usize>().ok());
            if let (Some(frame_count), Some(sequence_count)) = (counts.next(), counts.next()) {
                done.push(PreparedSubject { subject_id: subject, frame_count, sequence_count, cache_hit: true });
                continue;
            }
        }
        let rec = load_subject(&dir).map_err(|e| wrap(e.into()))?;
        let (frames, sequences) = prepare_recording(&rec, cfg).map_err(|e| wrap(e.into()))?;
        fs::create_dir_all(&target).map_err(io_err(&target)).map_err(wrap)?;
        write_frames_csv(&frames, &frames_path).map_err(|e| wrap(e.into()))?;
        write_sequences_csv(&sequences, &seq_path).map_err(|e| wrap(e.into()))?;
        // Written last: its presence means both files are complete.
        fs::write(&marker, format!("{} {}\n", frames.len(), sequences.len())).map_err(io_err(&marker)).map_err(wrap)?;
        done.push(PreparedSubject {
            subject_id: subject,
            frame_count: frames.len(),
            sequence_count: sequences.len(),
            cache_hit: false,
        });
    }
    Ok(done)
}

/// Reads the prepared sequences of every subject in `dir` (a
/// [`cache_dir`]), in subject order.
pub fn load_prepared(dir: &Path) -> Result<Vec<SubjectSequences>, PipelineError> {
    let subjects = list_subject_dirs(dir)?;
    if subjects.is_empty() {
        return Err(PipelineError::NoSubjects(dir.to_path_buf()));
    }
    subjects
        .iter()
        .filter(|d| d.join("complete").is_file())
        .map(|d| {
            Ok(SubjectSequences {
                subject_id: d.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                samples: read_sequences_csv(&d.join("sequences.csv"))?,
            })
        })
        .collect()
}

/// Equal-width histogram of the finite values; the count of NaNs is
/// returned separately.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `(bin_lo, bin_hi, count)`.
    pub bins: Vec<(f64, f64, u64)>,
    pub nan_count: u64,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Histogram {
        let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        let nan_count = (values.len() - finite.len()) as u64;
        if finite.is_empty() {
            return Histogram { bins: Vec::new(), nan_count };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0u64; bins];
        for v in finite {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let edge = |k: usize| lo + width * k as f64;
        Histogram { bins: (0..bins).map(|k| (edge(k), edge(k + 1), counts[k])).collect(), nan_count }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (lo, hi, n) in &self.bins {
            let _ = writeln!(out, "{lo},{hi},{n}");
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSummary {
    pub label_counts: BTreeMap<Label, u64>,
    pub sample_counts: BTreeMap<ChannelId, u64>,
    pub histograms: BTreeMap<ChannelId, Histogram>,
}

impl DatasetSummary {
    pub fn from_recordings<'a>(recs: impl IntoIterator<Item = &'a SubjectRecording>) -> Self {
        let mut s = DatasetSummary::default();
        let mut values: BTreeMap<ChannelId, Vec<f64>> = BTreeMap::new();
        for rec in recs {
            for &l in &rec.label_track().labels {
                *s.label_counts.entry(l).or_default() += 1;
            }
            for ch in rec.channels() {
                *s.sample_counts.entry(ch.id).or_default() += ch.samples.len() as u64;
                values.entry(ch.id).or_default().extend_from_slice(&ch.samples);
            }
        }
        s.histograms = values.into_iter().map(|(id, v)| (id, Histogram::new(&v, HIST_BINS))).collect();
        s
    }

    /// Writes `label_counts.csv`, `sample_counts.csv`, `nan_counts.csv` and
    /// one `hist_<channel>.csv` per channel into `out_dir`. Each file starts
    /// with one `# key = value` line per `metadata` entry.
    pub fn write(&self, out_dir: &Path, metadata: &[(String, String)]) -> Result<Vec<PathBuf>, PipelineError> {
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let header: String = metadata.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect();
        let mut files = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), PipelineError> {
            let p = out_dir.join(name);
            fs::write(&p, format!("{header}{body}")).map_err(io_err(&p))?;
            files.push(p);
            Ok(())
        };
        let mut labels = String::from("label,count\n");
        for (l, n) in &self.label_counts {
            let _ = writeln!(labels, "{},{n}", label_key(*l));
        }
        put("label_counts.csv".into(), labels)?;
        let mut samples = String::from("channel,count\n");
        let mut nans = String::from("channel,nan_count\n");
        for (id, n) in &self.sample_counts {
            let _ = writeln!(samples, "{id},{n}");
            let _ = writeln!(nans, "{id},{}", self.histograms.get(id).map_or(0, |h| h.nan_count));
        }
        put("sample_counts.csv".into(), samples)?;
        put("nan_counts.csv".into(), nans)?;
        for (id, h) in &self.histograms {
            put(format!("hist_{}.csv", id.name().to_lowercase()), h.to_csv())?;
        }
        Ok(files)
    }
}

fn label_key(l: Label) -> String {
    match l {
        Label::Other(id) => format!("OTHER_{id}"),
        l => l.name().to_string(),
    }
}

/// Loads every subject under `root` and summarizes them.
pub fn summarize_dataset(root: &Path) -> Result<DatasetSummary, PipelineError> {
    let dirs = list_subject_dirs(root)?;
    if dirs.is_empty() {
        return Err(PipelineError::NoSubjects(root.to_path_buf()));
    }
    let recs = dirs.iter().map(|d| load_subject(d)).collect::<Result<Vec<_>, _>>()?;
    Ok(DatasetSummary::from_recordings(&recs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::window_bounds;
    use crate::synth::{generate, synth_subject, SynthSpec};

    #[test]
    fn histogram_partitions_finite_values() {
        let v = [0.0, 1.0, f64::NAN, 2.0, 10.0, 10.0, f64::NAN];
        let h = Histogram::new(&v, 5);
        assert_eq!(h.nan_count, 2);
        assert_eq!(h.bins.iter().map(|b| b.2).sum::<u64>(), 5);
        assert_eq!(h.bins[0], (0.0, 2.0, 2));
        assert_eq!(h.bins[4].2, 2);
        let flat = Histogram::new(&[3.0, 3.0], 4);
        assert_eq!(flat.bins[0].2, 2);
        assert!(Histogram::new(&[f64::NAN], 4).bins.is_empty());
    }

    #[test]
    fn config_hash_tracks_settings() {
        let a = PrepConfig::default();
        let b = PrepConfig { window: WindowSpec::new(42000, 350).unwrap(), ..a };
        let c = PrepConfig { sequence: SequenceConfig { steps: 5, ..a.sequence }, ..a };
        assert_eq!(a.hash(), PrepConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn prepare_caches_and_matches_window_arithmetic() {
        let spec = SynthSpec { n_subjects: 2, condition_seconds: 60, ..SynthSpec::default() };
        let data = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        generate(&spec, data.path()).unwrap();
        let cfg = PrepConfig { window: WindowSpec::new(42000, 1400).unwrap(), ..PrepConfig::default() };
        let first = prepare_dataset(data.path(), cache.path(), &cfg).unwrap();
        assert!(first.iter().all(|p| !p.cache_hit));
        let labels = (spec.total_seconds() * 700) as usize;
        assert_eq!(first[0].frame_count, window_bounds(cfg.window, labels).unwrap().len());
        let again = prepare_dataset(data.path(), cache.path(), &cfg).unwrap();
        assert!(again.iter().all(|p| p.cache_hit));
        assert_eq!(
            again.iter().map(|p| p.sequence_count).collect::<Vec<_>>(),
            first.iter().map(|p| p.sequence_count).collect::<Vec<_>>()
        );
        let other = PrepConfig { window: WindowSpec::new(42000, 700).unwrap(), ..cfg };
        assert!(prepare_dataset(data.path(), cache.path(), &other).unwrap().iter().all(|p| !p.cache_hit));

        let loaded = load_prepared(&cache_dir(cache.path(), &cfg)).unwrap();
        assert_eq!(loaded.len(), 2);
        let (_, direct) = prepare_recording(&synth_subject(&spec, 0).unwrap(), &cfg).unwrap();
        assert_eq!(loaded[0].samples, direct);
    }

    #[test]
    fn summary_counts() {
        let spec = SynthSpec { n_subjects: 1, condition_seconds: 60, ..SynthSpec::default() };
        let rec = synth_subject(&spec, 0).unwrap();
        let s = DatasetSummary::from_recordings([&rec]);
        assert_eq!(s.label_counts[&Label::Stress], 42000);
        assert_eq!(s.sample_counts[&ChannelId::Bvp], 64 * u64::from(spec.total_seconds()));
        let h = &s.histograms[&ChannelId::Eda];
        assert_eq!(h.bins.len(), HIST_BINS);
        assert_eq!(h.bins.iter().map(|b| b.2).sum::<u64>(), s.sample_counts[&ChannelId::Eda]);
        let out = tempfile::tempdir().unwrap();
        s.write(out.path(), &[]).unwrap();
        let labels = fs::read_to_string(out.path().join("label_counts.csv")).unwrap();
        assert!(labels.contains("\nSTRESS,42000\n"));
        assert!(out.path().join("hist_acc_x.csv").is_file());
    }

    #[test]
    fn empty_root() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(summarize_dataset(d.path()), Err(PipelineError::NoSubjects(_))));
        assert!(matches!(
            prepare_dataset(d.path(), d.path(), &PrepConfig::default()),
            Err(PipelineError::NoSubjects(_))
        ));
    }
}
