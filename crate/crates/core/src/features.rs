//! Baseline normalization and rolling-window statistics.
//!
//! Windows live on the 700 Hz label timeline. Each channel realizes a window
//! at its own rate by index scaling, so a 42000-label window covers 1920 ACC
//! samples, 3840 BVP samples and 240 EDA/TEMP samples. Per window and channel
//! the pipeline imputes missing samples with the window mean and then reduces
//! the slice to five statistics, giving 6 × 5 = 30 features per frame.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{format_sample, ChannelId, ChannelSeries, Label, SampleRate, SubjectRecording};

pub const STATS_PER_CHANNEL: usize = 5;
pub const NUM_FEATURES: usize = ChannelId::ALL.len() * STATS_PER_CHANNEL;
pub const STAT_NAMES: [&str; STATS_PER_CHANNEL] = ["min", "max", "mean", "range", "std"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no baseline-labeled samples for channel {0}")]
    NoBaselineData(ChannelId),
    #[error("recording has {total} label samples, window needs {length}")]
    RecordingTooShort { total: usize, length: usize },
    #[error("window contains only missing samples")]
    AllMissing,
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid window spec: length {length}, step {step}")]
    InvalidWindowSpec { length: usize, step: usize },
    #[error("channel {channel}, window starting at label {start}: {source}")]
    InWindow {
        channel: ChannelId,
        start: usize,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("frame file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Window length and step in label samples (700 Hz).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    length: usize,
    step: usize,
}

impl WindowSpec {
    pub fn new(length: usize, step: usize) -> Result<Self, FeatureError> {
        if length == 0 || step == 0 || step > length {
            return Err(FeatureError::InvalidWindowSpec { length, step });
        }
        Ok(WindowSpec { length, step })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn label_rate(&self) -> SampleRate {
        SampleRate::label()
    }
}

impl Default for WindowSpec {
    /// 60 s windows advanced by 0.25 s.
    fn default() -> Self {
        WindowSpec { length: 42000, step: 175 }
    }
}

/// Five statistics of one channel slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub range: f64,
    pub std: f64,
}

impl WindowStats {
    pub fn to_array(self) -> [f64; STATS_PER_CHANNEL] {
        [self.min, self.max, self.mean, self.range, self.std]
    }
}

/// One window reduced to its feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub t_end_seconds: f64,
    /// `[ACC_X, ACC_Y, ACC_Z, BVP, EDA, TEMP] × [min, max, mean, range, std]`.
    pub features: Vec<f64>,
    pub raw_label: Label,
    /// Fraction of the window's label samples carrying `raw_label`.
    pub coverage: f64,
}

pub fn feature_index(channel: ChannelId, stat: usize) -> usize {
    channel.index() * STATS_PER_CHANNEL + stat
}

pub fn feature_name(index: usize) -> String {
    format!(
        "{}_{}",
        ChannelId::ALL[index / STATS_PER_CHANNEL].name(),
        STAT_NAMES[index % STATS_PER_CHANNEL]
    )
}

/// Subtracts from every channel the mean of its samples that fall on
/// BASELINE-labeled label samples. Missing samples are skipped in the mean and
/// stay NaN.
pub fn baseline_normalize(rec: &SubjectRecording) -> Result<SubjectRecording, FeatureError> {
    let labels = &rec.label_track().labels;
    let label_rate = rec.label_track().rate;
    let mut means = [0.0; 6];
    for ch in rec.channels() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, &v) in ch.samples.iter().enumerate() {
            let li = label_rate.rescale_index(i, ch.rate);
            if v.is_nan() || labels.get(li) != Some(&Label::Baseline) {
                continue;
            }
            sum += v;
            n += 1;
        }
        if n == 0 {
            return Err(FeatureError::NoBaselineData(ch.id));
        }
        means[ch.id.index()] = sum / n as f64;
    }
    Ok(rec.map_channels(|ch| {
        let m = means[ch.id.index()];
        ch.samples.iter().map(|v| v - m).collect()
    }))
}

/// Half-open `(start, end)` label-index pairs of every full window.
pub fn window_bounds(spec: WindowSpec, total: usize) -> Result<Vec<(usize, usize)>, FeatureError> {
    if total < spec.length {
        return Err(FeatureError::RecordingTooShort { total, length: spec.length });
    }
    let count = (total - spec.length) / spec.step + 1;
    Ok((0..count)
        .map(|k| (k * spec.step, k * spec.step + spec.length))
        .collect())
}

/// Channel samples covered by the label window `[start, end)`. Both bounds
/// are floored onto the channel timeline and clipped to the channel length.
pub fn channel_slice(ch: &ChannelSeries, start: usize, end: usize, label_rate: SampleRate) -> &[f64] {
    let n = ch.samples.len();
    let lo = ch.rate.rescale_index(start, label_rate).min(n);
    let hi = ch.rate.rescale_index(end, label_rate).min(n);
    &ch.samples[lo..hi]
}

/// Replaces NaNs by the mean of the remaining values.
pub fn impute_window(values: &[f64]) -> Result<Cow<'_, [f64]>, FeatureError> {
    if !values.iter().any(|v| v.is_nan()) {
        return Ok(Cow::Borrowed(values));
    }
    let (sum, n) = values
        .iter()
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(FeatureError::AllMissing);
    }
    let mean = sum / n as f64;
    Ok(Cow::Owned(
        values.iter().map(|&v| if v.is_nan() { mean } else { v }).collect(),
    ))
}

/// Min, max, mean, range and population standard deviation.
pub fn window_stats(values: &[f64]) -> Result<WindowStats, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let n = values.len() as f64;
    // Rounding in the sum can push the mean just outside [min, max].
    let mean = (sum / n).clamp(min, max);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(WindowStats { min, max, mean, range: max - min, std: var.sqrt() })
}

/// Majority-vote label over a window, ignoring UNDEFINED and OTHER.
#[derive(Default)]
struct LabelCounter {
    counts: [usize; 8],
}

impl LabelCounter {
    fn add(&mut self, l: Label) {
        self.counts[l.id() as usize] += 1;
    }

    fn remove(&mut self, l: Label) {
        self.counts[l.id() as usize] -= 1;
    }

    fn majority(&self, window: usize) -> (Label, f64) {
        let mut best = (Label::Undefined, 0usize);
        for l in [Label::Baseline, Label::Stress, Label::Amusement, Label::Meditation] {
            let c = self.counts[l.id() as usize];
            if c > best.1 {
                best = (l, c);
            }
        }
        (best.0, best.1 as f64 / window as f64)
    }
}

/// Computes one frame per window of a (normalized) recording.
pub fn extract_frames(rec: &SubjectRecording, spec: WindowSpec) -> Result<Vec<FeatureFrame>, FeatureError> {
    let track = rec.label_track();
    let bounds = window_bounds(spec, track.len())?;
    let mut counter = LabelCounter::default();
    let mut covered = (0, 0);
    let mut frames = Vec::with_capacity(bounds.len());
    for (start, end) in bounds {
        while covered.1 < end {
            counter.add(track.labels[covered.1]);
            covered.1 += 1;
        }
        while covered.0 < start {
            counter.remove(track.labels[covered.0]);
            covered.0 += 1;
        }
        let mut features = Vec::with_capacity(NUM_FEATURES);
        for id in ChannelId::ALL {
            let in_window = |source| FeatureError::InWindow { channel: id, start, source: Box::new(source) };
            let slice = channel_slice(rec.channel(id), start, end, track.rate);
            let filled = impute_window(slice).map_err(in_window)?;
            let stats = window_stats(&filled).map_err(in_window)?;
            features.extend(stats.to_array());
        }
        let (raw_label, coverage) = counter.majority(end - start);
        frames.push(FeatureFrame {
            t_end_seconds: track.rate.duration_of(end),
            features,
            raw_label,
            coverage,
        });
    }
    Ok(frames)
}

pub fn frames_csv_header() -> String {
    let mut h = String::from("t_end,label,coverage");
    for i in 0..NUM_FEATURES {
        write!(h, ",f{i:02}").unwrap();
    }
    h
}

/// Writes frames as CSV with header `t_end,label,coverage,f00..f29`. The
/// label column holds the numeric label id.
pub fn write_frames_csv(frames: &[FeatureFrame], path: &Path) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", frames_csv_header())?;
    for f in frames {
        write!(w, "{},{},{}", format_sample(f.t_end_seconds), f.raw_label.id(), format_sample(f.coverage))?;
        for v in &f.features {
            write!(w, ",{}", format_sample(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<FeatureFrame>, FeatureError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(frames_csv_header().as_str()) {
        return Err(FeatureError::Format(format!("{}: unexpected header", path.display())));
    }
    let bad = |n: usize| FeatureError::Format(format!("{}: malformed row {}", path.display(), n + 2));
    lines
        .enumerate()
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 + NUM_FEATURES {
                return Err(bad(n));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n));
            let raw_label = cols[1].parse::<u8>().ok().and_then(Label::from_id).ok_or_else(|| bad(n))?;
            Ok(FeatureFrame {
                t_end_seconds: num(cols[0])?,
                raw_label,
                coverage: num(cols[2])?,
                features: cols[3..].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::LabelTrack;
    use proptest::prelude::*;

    fn recording(labels: Vec<Label>, f: impl Fn(ChannelId, usize) -> f64) -> SubjectRecording {
        let total = labels.len();
        let channels = ChannelId::ALL.map(|id| {
            let n = id.e4_rate().rescale_index(total, SampleRate::label());
            ChannelSeries::new(id, id.e4_rate(), (0..n).map(|i| f(id, i)).collect()).unwrap()
        });
        SubjectRecording::new("S1", channels, LabelTrack::new(labels)).unwrap()
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let rec = recording(vec![Label::Baseline; 7000], |_, _| 5.0);
        let norm = baseline_normalize(&rec).unwrap();
        for ch in norm.channels() {
            assert!(ch.samples.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn half_baseline_mean_subtracted() {
        // A 4 Hz channel with 4 samples spans 700 labels; baseline covers the
        // first 350, i.e. the first two samples.
        let mut labels = vec![Label::Baseline; 350];
        labels.extend(vec![Label::Stress; 350]);
        let rec = recording(labels, |id, i| match id {
            ChannelId::Eda => (i + 1) as f64,
            _ => 0.0,
        });
        let norm = baseline_normalize(&rec).unwrap();
        assert_eq!(norm.channel(ChannelId::Eda).samples, vec![-0.5, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn baseline_mean_skips_nan() {
        let rec = recording(vec![Label::Baseline; 700], |id, i| match (id, i) {
            (ChannelId::Temp, 0) => f64::NAN,
            (ChannelId::Temp, _) => 2.0,
            _ => 1.0,
        });
        let norm = baseline_normalize(&rec).unwrap();
        let temp = &norm.channel(ChannelId::Temp).samples;
        assert!(temp[0].is_nan());
        assert_eq!(&temp[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn no_baseline_is_an_error() {
        let rec = recording(vec![Label::Stress; 700], |_, _| 1.0);
        assert!(matches!(baseline_normalize(&rec), Err(FeatureError::NoBaselineData(_))));
    }

    #[test]
    fn bounds_examples() {
        let spec = WindowSpec::default();
        assert_eq!(window_bounds(spec, 42000).unwrap(), vec![(0, 42000)]);
        let b = window_bounds(spec, 84000).unwrap();
        assert_eq!(b.len(), 241);
        assert_eq!(*b.last().unwrap(), (42000, 84000));
        assert!(matches!(window_bounds(spec, 41999), Err(FeatureError::RecordingTooShort { .. })));
    }

    #[test]
    fn window_spec_validation() {
        assert!(WindowSpec::new(0, 1).is_err());
        assert!(WindowSpec::new(10, 0).is_err());
        assert!(WindowSpec::new(10, 11).is_err());
        assert!(WindowSpec::new(10, 10).is_ok());
    }

    #[test]
    fn slices_scale_to_native_rates() {
        let label = SampleRate::label();
        let mk = |rate: u64, n: usize| {
            ChannelSeries::new(ChannelId::Bvp, SampleRate::hz(rate), (0..n).map(|i| i as f64).collect()).unwrap()
        };
        let bvp = mk(64, 10_000);
        let s = channel_slice(&bvp, 0, 42000, label);
        assert_eq!((s.len(), s[0]), (3840, 0.0));
        let eda = mk(4, 1000);
        let s = channel_slice(&eda, 175, 42175, label);
        assert_eq!((s[0], s.len()), (1.0, 240));
        let acc = mk(32, 5000);
        assert_eq!(channel_slice(&acc, 0, 42000, label).len(), 1920);
        let same = mk(700, 100);
        assert_eq!(channel_slice(&same, 13, 57, label), &same.samples[13..57]);
    }

    #[test]
    fn imputation() {
        assert_eq!(impute_window(&[1.0, f64::NAN, 3.0]).unwrap().as_ref(), &[1.0, 2.0, 3.0]);
        let clean = [4.0, 5.0];
        assert!(matches!(impute_window(&clean).unwrap(), Cow::Borrowed(_)));
        assert!(matches!(impute_window(&[f64::NAN, f64::NAN]), Err(FeatureError::AllMissing)));
    }

    #[test]
    fn stats_examples() {
        let s = window_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.range), (1.0, 5.0, 3.0, 4.0));
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        let c = window_stats(&[0.1; 7]).unwrap();
        assert_eq!(c.to_array(), [0.1, 0.1, 0.1, 0.0, 0.0]);
        assert_eq!(window_stats(&[7.0]).unwrap().to_array(), [7.0, 7.0, 7.0, 0.0, 0.0]);
        assert!(matches!(window_stats(&[]), Err(FeatureError::EmptyWindow)));
    }

    #[test]
    fn frames_of_two_minute_recording() {
        let rec = recording(vec![Label::Stress; 84000], |id, i| (i as f64 * 0.37 + id.index() as f64).sin());
        let frames = extract_frames(&rec, WindowSpec::default()).unwrap();
        assert_eq!(frames.len(), 241);
        for f in &frames {
            assert_eq!(f.features.len(), NUM_FEATURES);
            assert!(f.features.iter().all(|v| v.is_finite()));
            assert_eq!((f.raw_label, f.coverage), (Label::Stress, 1.0));
        }
        assert_eq!(frames[0].t_end_seconds, 60.0);
        assert_eq!(frames[240].t_end_seconds, 120.0);
    }

    #[test]
    fn majority_label_and_coverage() {
        let mut labels = vec![Label::Amusement; 300];
        labels.extend(vec![Label::Undefined; 200]);
        labels.extend(vec![Label::Stress; 500]);
        let rec = recording(labels, |_, _| 0.0);
        let frames = extract_frames(&rec, WindowSpec::new(700, 100).unwrap()).unwrap();
        assert_eq!(frames.len(), 4);
        assert_eq!((frames[0].raw_label, frames[0].coverage), (Label::Amusement, 300.0 / 700.0));
        assert_eq!((frames[3].raw_label, frames[3].coverage), (Label::Stress, 500.0 / 700.0));
        let rec = recording(vec![Label::Undefined; 700], |_, _| 0.0);
        let f = &extract_frames(&rec, WindowSpec::new(700, 700).unwrap()).unwrap()[0];
        assert_eq!((f.raw_label, f.coverage), (Label::Undefined, 0.0));
    }

    #[test]
    fn all_missing_window_propagates() {
        let rec = recording(vec![Label::Stress; 1400], |id, i| {
            if id == ChannelId::Eda && i < 4 { f64::NAN } else { 1.0 }
        });
        let err = extract_frames(&rec, WindowSpec::new(700, 700).unwrap()).unwrap_err();
        assert!(matches!(err, FeatureError::InWindow { channel: ChannelId::Eda, start: 0, .. }));
    }

    #[test]
    fn frame_csv_round_trip() {
        let rec = recording(vec![Label::Meditation; 2100], |_, i| (i as f64).sqrt() / 3.0);
        let frames = extract_frames(&rec, WindowSpec::new(700, 350).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.csv");
        write_frames_csv(&frames, &path).unwrap();
        assert_eq!(read_frames_csv(&path).unwrap(), frames);
    }

    #[test]
    fn frame_count_independent_of_content() {
        let a = recording(vec![Label::Stress; 5000], |_, _| 0.0);
        let b = recording(vec![Label::Meditation; 5000], |_, i| i as f64);
        let spec = WindowSpec::new(1400, 175).unwrap();
        let fa = extract_frames(&a, spec).unwrap();
        let fb = extract_frames(&b, spec).unwrap();
        assert_eq!(fa.len(), fb.len());
        assert_eq!(fa.len(), window_bounds(spec, 5000).unwrap().len());
    }

    proptest! {
        #[test]
        fn stats_ordering(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let s = window_stats(&values).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert_eq!(s.range, s.max - s.min);
            prop_assert!(s.std >= 0.0);
        }

        #[test]
        fn shift_equivariance(values in prop::collection::vec(-10f64..10.0, 1..100), c in -100f64..100.0) {
            let a = window_stats(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let b = window_stats(&shifted).unwrap();
            prop_assert!((b.min - a.min - c).abs() <= 1e-12);
            prop_assert!((b.max - a.max - c).abs() <= 1e-12);
            prop_assert!((b.mean - a.mean - c).abs() <= 1e-12);
            prop_assert!((b.range - a.range).abs() <= 1e-12);
            prop_assert!((b.std - a.std).abs() <= 1e-12);
        }

        #[test]
        fn scale_equivariance(values in prop::collection::vec(-10f64..10.0, 1..100), k in 0.01f64..100.0) {
            let a = window_stats(&values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let b = window_stats(&scaled).unwrap();
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert!((x * k - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn baseline_mean_vanishes(offset in -50f64..50.0, split in 1usize..9) {
            let total = 1400;
            let labels: Vec<Label> = (0..total)
                .map(|i| if i < split * 140 { Label::Baseline } else { Label::Stress })
                .collect();
            let rec = recording(labels.clone(), |id, i| offset + (i as f64 * 0.3 + id.index() as f64).cos());
            let norm = baseline_normalize(&rec).unwrap();
            for ch in norm.channels() {
                let vals: Vec<f64> = ch.samples.iter().enumerate()
                    .filter(|(i, _)| labels[SampleRate::label().rescale_index(*i, ch.rate)] == Label::Baseline)
                    .map(|(_, v)| *v)
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                prop_assert!(mean.abs() <= 1e-9);
            }
        }
    }
}
