//! Multi-rate wrist recordings and the neutral per-subject directory format.
//!
//! A subject directory holds one text file per channel plus a label file:
//!
//! ```text
//! S2/
//!   acc_x.csv acc_y.csv acc_z.csv bvp.csv eda.csv temp.csv
//!   labels.csv
//! ```
//!
//! Every file starts with a `rate_hz=<r>` header line followed by one value per
//! line. Channel values are floats (`nan` marks a missing sample), label values
//! are integer condition ids.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rate of the label timeline. Window geometry is expressed on it.
pub const LABEL_RATE_HZ: u32 = 700;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("subject {subject}: missing channel file {}", path.display())]
    MissingChannel { subject: String, channel: ChannelId, path: PathBuf },
    #[error("subject {subject}: {stream} declares {declared} Hz, expected {expected} Hz")]
    RateMismatch {
        subject: String,
        stream: String,
        declared: SampleRate,
        expected: SampleRate,
    },
    #[error(
        "subject {subject}: {channel} has {samples} samples, label track implies {expected:.3}"
    )]
    DurationMismatch {
        subject: String,
        channel: ChannelId,
        samples: usize,
        expected: f64,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid recording: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SignalError + '_ {
    move |source| SignalError::Io { path: path.to_path_buf(), source }
}

/// The six wrist channels, in canonical feature order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    AccX,
    AccY,
    AccZ,
    Bvp,
    Eda,
    Temp,
}

impl ChannelId {
    pub const ALL: [ChannelId; 6] = [
        ChannelId::AccX,
        ChannelId::AccY,
        ChannelId::AccZ,
        ChannelId::Bvp,
        ChannelId::Eda,
        ChannelId::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::AccX => "ACC_X",
            ChannelId::AccY => "ACC_Y",
            ChannelId::AccZ => "ACC_Z",
            ChannelId::Bvp => "BVP",
            ChannelId::Eda => "EDA",
            ChannelId::Temp => "TEMP",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ChannelId::AccX => "acc_x.csv",
            ChannelId::AccY => "acc_y.csv",
            ChannelId::AccZ => "acc_z.csv",
            ChannelId::Bvp => "bvp.csv",
            ChannelId::Eda => "eda.csv",
            ChannelId::Temp => "temp.csv",
        }
    }

    /// Native Empatica E4 sampling rate.
    pub fn e4_rate(self) -> SampleRate {
        match self {
            ChannelId::AccX | ChannelId::AccY | ChannelId::AccZ => SampleRate::hz(32),
            ChannelId::Bvp => SampleRate::hz(64),
            ChannelId::Eda | ChannelId::Temp => SampleRate::hz(4),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A positive rational sampling rate in samples per second.
///
/// Kept rational so that index scaling between timelines is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleRate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl SampleRate {
    pub const fn hz(rate: u64) -> Self {
        SampleRate { num: rate, den: 1 }
    }

    pub fn new(num: u64, den: u64) -> Option<Self> {
        if num == 0 || den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(SampleRate { num: num / g, den: den / g })
    }

    pub fn label() -> Self {
        SampleRate::hz(LABEL_RATE_HZ as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(index * self / from)`: maps an index on the `from` timeline onto
    /// this one.
    pub fn rescale_index(self, index: usize, from: SampleRate) -> usize {
        let n = index as u128 * self.num as u128 * from.den as u128;
        let d = self.den as u128 * from.num as u128;
        (n / d) as usize
    }

    /// Duration in seconds covered by `count` samples.
    pub fn duration_of(self, count: usize) -> f64 {
        count as f64 * self.den as f64 / self.num as f64
    }
}

impl fmt::Display for SampleRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for SampleRate {
    type Err = String;

    /// Accepts `64`, `64/1`, or a terminating decimal such as `0.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid sampling rate {s:?}");
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return SampleRate::new(n, d).ok_or_else(bad);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u64.pow(frac.len() as u32);
            let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            return SampleRate::new(int * den + frac, den).ok_or_else(bad);
        }
        let n = s.parse().map_err(|_| bad())?;
        SampleRate::new(n, 1).ok_or_else(bad)
    }
}

/// Condition labels of the label track.
///
/// Ids 5..=7 are kept verbatim as `Other` so that files round-trip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Undefined,
    Baseline,
    Stress,
    Amusement,
    Meditation,
    Other(u8),
}

impl Label {
    pub fn from_id(id: u8) -> Option<Label> {
        Some(match id {
            0 => Label::Undefined,
            1 => Label::Baseline,
            2 => Label::Stress,
            3 => Label::Amusement,
            4 => Label::Meditation,
            5..=7 => Label::Other(id),
            _ => return None,
        })
    }

    pub fn id(self) -> u8 {
        match self {
            Label::Undefined => 0,
            Label::Baseline => 1,
            Label::Stress => 2,
            Label::Amusement => 3,
            Label::Meditation => 4,
            Label::Other(id) => id,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Undefined => "UNDEFINED",
            Label::Baseline => "BASELINE",
            Label::Stress => "STRESS",
            Label::Amusement => "AMUSEMENT",
            Label::Meditation => "MEDITATION",
            Label::Other(_) => "OTHER",
        }
    }

    /// One of the four study conditions (not UNDEFINED/OTHER).
    pub fn is_condition(self) -> bool {
        matches!(
            self,
            Label::Baseline | Label::Stress | Label::Amusement | Label::Meditation
        )
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSeries {
    pub id: ChannelId,
    pub rate: SampleRate,
    pub samples: Vec<f64>,
}

impl ChannelSeries {
    /// Rejects empty series and infinite samples. NaN is allowed and marks a
    /// missing sample.
    pub fn new(id: ChannelId, rate: SampleRate, samples: Vec<f64>) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::Invalid(format!("{id} has no samples")));
        }
        if let Some(i) = samples.iter().position(|v| v.is_infinite()) {
            return Err(SignalError::Invalid(format!("{id} sample {i} is infinite")));
        }
        Ok(ChannelSeries { id, rate, samples })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.rate.duration_of(self.samples.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelTrack {
    pub rate: SampleRate,
    pub labels: Vec<Label>,
}

impl LabelTrack {
    pub fn new(labels: Vec<Label>) -> Self {
        LabelTrack { rate: SampleRate::label(), labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.rate.duration_of(self.labels.len())
    }
}

/// All six wrist channels and the label track of one subject.
///
/// Construction validates channel set, rates and duration consistency, so a
/// value of this type is always well formed.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecording {
    subject_id: String,
    channels: BTreeMap<ChannelId, ChannelSeries>,
    label_track: LabelTrack,
}

impl SubjectRecording {
    pub fn new(
        subject_id: impl Into<String>,
        channels: impl IntoIterator<Item = ChannelSeries>,
        label_track: LabelTrack,
    ) -> Result<Self, SignalError> {
        let subject_id = subject_id.into();
        let mut map = BTreeMap::new();
        for ch in channels {
            let id = ch.id;
            if map.insert(id, ch).is_some() {
                return Err(SignalError::Invalid(format!(
                    "subject {subject_id}: channel {id} given twice"
                )));
            }
        }
        let rec = SubjectRecording { subject_id, channels: map, label_track };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<(), SignalError> {
        let subject = &self.subject_id;
        if self.label_track.rate != SampleRate::label() {
            return Err(SignalError::RateMismatch {
                subject: subject.clone(),
                stream: "labels".into(),
                declared: self.label_track.rate,
                expected: SampleRate::label(),
            });
        }
        if self.label_track.is_empty() {
            return Err(SignalError::Invalid(format!("subject {subject}: empty label track")));
        }
        let duration = self.label_track.duration_seconds();
        for id in ChannelId::ALL {
            let ch = self.channels.get(&id).ok_or_else(|| SignalError::MissingChannel {
                subject: subject.clone(),
                channel: id,
                path: PathBuf::from(id.file_name()),
            })?;
            if ch.rate != id.e4_rate() {
                return Err(SignalError::RateMismatch {
                    subject: subject.clone(),
                    stream: id.name().into(),
                    declared: ch.rate,
                    expected: id.e4_rate(),
                });
            }
            if ch.samples.is_empty() || ch.samples.iter().any(|v| v.is_infinite()) {
                return Err(SignalError::Invalid(format!(
                    "subject {subject}: {id} is empty or has infinite samples"
                )));
            }
            // Tolerance is one native sample of the channel.
            let expected = duration * ch.rate.as_f64();
            if (ch.samples.len() as f64 - expected).abs() > 1.0 + 1e-9 {
                return Err(SignalError::DurationMismatch {
                    subject: subject.clone(),
                    channel: id,
                    samples: ch.samples.len(),
                    expected,
                });
            }
        }
        Ok(())
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn channel(&self, id: ChannelId) -> &ChannelSeries {
        &self.channels[&id]
    }

    pub fn channels(&self) -> impl Iterator<Item = &ChannelSeries> {
        self.channels.values()
    }

    pub fn label_track(&self) -> &LabelTrack {
        &self.label_track
    }

    pub fn duration_seconds(&self) -> f64 {
        self.label_track.duration_seconds()
    }

    /// Returns a copy with the samples of every channel replaced by `f`.
    /// Lengths must be preserved.
    pub fn map_channels(&self, mut f: impl FnMut(&ChannelSeries) -> Vec<f64>) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|(&id, ch)| {
                let samples = f(ch);
                assert_eq!(samples.len(), ch.samples.len(), "channel length changed");
                (id, ChannelSeries { id, rate: ch.rate, samples })
            })
            .collect();
        SubjectRecording {
            subject_id: self.subject_id.clone(),
            channels,
            label_track: self.label_track.clone(),
        }
    }
}

fn read_header(path: &Path, first: Option<&str>) -> Result<SampleRate, SignalError> {
    let parse_err = |message: String| SignalError::Parse { path: path.to_path_buf(), line: 1, message };
    let line = first.ok_or_else(|| parse_err("empty file".into()))?;
    let value = line
        .trim()
        .strip_prefix("rate_hz=")
        .ok_or_else(|| parse_err(format!("expected `rate_hz=<r>` header, found {line:?}")))?;
    value.parse().map_err(parse_err)
}

fn read_channel(path: &Path, id: ChannelId) -> Result<ChannelSeries, SignalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let rate = read_header(path, lines.next())?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| SignalError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: format!("not a number: {line:?}"),
        })?;
        if v.is_infinite() {
            return Err(SignalError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: "infinite sample".into(),
            });
        }
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(SignalError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no samples".into(),
        });
    }
    Ok(ChannelSeries { id, rate, samples })
}

fn read_labels(path: &Path) -> Result<LabelTrack, SignalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let rate = read_header(path, lines.next())?;
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let label = line.parse::<u8>().ok().and_then(Label::from_id).ok_or_else(|| {
            SignalError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("invalid label id {line:?}"),
            }
        })?;
        labels.push(label);
    }
    Ok(LabelTrack { rate, labels })
}

/// Loads and validates one subject directory. The subject id is the
/// directory name.
pub fn load_subject(dir: &Path) -> Result<SubjectRecording, SignalError> {
    let subject_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut channels = Vec::with_capacity(6);
    for id in ChannelId::ALL {
        let path = dir.join(id.file_name());
        if !path.is_file() {
            return Err(SignalError::MissingChannel { subject: subject_id, channel: id, path });
        }
        channels.push(read_channel(&path, id)?);
    }
    let labels_path = dir.join("labels.csv");
    if !labels_path.is_file() {
        return Err(SignalError::Io {
            path: labels_path,
            source: io::Error::new(io::ErrorKind::NotFound, "label file missing"),
        });
    }
    let labels = read_labels(&labels_path)?;
    SubjectRecording::new(subject_id, channels, labels)
}

/// Writes a float so that parsing it back yields the identical bit pattern.
pub fn format_sample(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Writes `rec` into `dir` (created if absent) in the neutral format.
pub fn store_subject(rec: &SubjectRecording, dir: &Path) -> Result<(), SignalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for ch in rec.channels() {
        let path = dir.join(ch.id.file_name());
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        let res: io::Result<()> = (|| {
            writeln!(w, "rate_hz={}", ch.rate)?;
            for &v in &ch.samples {
                writeln!(w, "{}", format_sample(v))?;
            }
            w.flush()
        })();
        res.map_err(io_err(&path))?;
    }
    let path = dir.join("labels.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let res: io::Result<()> = (|| {
        writeln!(w, "rate_hz={}", rec.label_track.rate)?;
        for l in &rec.label_track.labels {
            writeln!(w, "{}", l.id())?;
        }
        w.flush()
    })();
    res.map_err(io_err(&path))
}

/// Sort key placing `S2` before `S10`.
pub fn subject_sort_key(id: &str) -> (String, u64, String) {
    let digits_at = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    let (prefix, rest) = id.split_at(digits_at);
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let num = rest[..end].parse().unwrap_or(0);
    (prefix.to_string(), num, rest[end..].to_string())
}

/// Subject directories (names starting with `S`) under `root`, in subject
/// order.
pub fn list_subject_dirs(root: &Path) -> Result<Vec<PathBuf>, SignalError> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        let path = entry.path();
        let is_subject = path.is_dir()
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with('S'));
        if is_subject {
            dirs.push(path);
        }
    }
    dirs.sort_by_cached_key(|p| subject_sort_key(&p.file_name().unwrap().to_string_lossy()));
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn constant_recording(id: &str, seconds: usize, value: f64) -> SubjectRecording {
        let channels = ChannelId::ALL.map(|c| {
            let rate = c.e4_rate();
            let n = rate.rescale_index(seconds * 700, SampleRate::label());
            ChannelSeries::new(c, rate, vec![value; n]).unwrap()
        });
        let labels = LabelTrack::new(vec![Label::Baseline; seconds * 700]);
        SubjectRecording::new(id, channels, labels).unwrap()
    }

    #[test]
    fn ten_second_subject_loads() {
        let dir = tempfile::tempdir().unwrap();
        let rec = constant_recording("S2", 10, 1.5);
        let path = dir.path().join("S2");
        store_subject(&rec, &path).unwrap();
        let loaded = load_subject(&path).unwrap();
        assert_eq!(loaded.channel(ChannelId::Bvp).samples.len(), 640);
        assert_eq!(loaded.label_track().len(), 7000);
        assert_eq!(loaded.duration_seconds(), 10.0);
        assert_eq!(loaded.subject_id(), "S2");
    }

    #[test]
    fn missing_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("S3");
        store_subject(&constant_recording("S3", 2, 0.0), &path).unwrap();
        fs::remove_file(path.join("temp.csv")).unwrap();
        match load_subject(&path) {
            Err(SignalError::MissingChannel { channel, .. }) => assert_eq!(channel, ChannelId::Temp),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_bvp_rate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("S4");
        store_subject(&constant_recording("S4", 10, 0.0), &path).unwrap();
        let bvp = path.join("bvp.csv");
        let text = fs::read_to_string(&bvp).unwrap().replacen("rate_hz=64", "rate_hz=65", 1);
        fs::write(&bvp, text).unwrap();
        assert!(matches!(load_subject(&path), Err(SignalError::RateMismatch { .. })));
    }

    #[test]
    fn duration_mismatch_detected() {
        let mut channels: Vec<_> = ChannelId::ALL
            .map(|c| ChannelSeries::new(c, c.e4_rate(), vec![0.0; 10 * c.e4_rate().as_f64() as usize]).unwrap())
            .into();
        channels[3].samples.truncate(600);
        let labels = LabelTrack::new(vec![Label::Stress; 7000]);
        assert!(matches!(
            SubjectRecording::new("S5", channels, labels),
            Err(SignalError::DurationMismatch { channel: ChannelId::Bvp, .. })
        ));
    }

    #[test]
    fn nan_and_extreme_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = constant_recording("S6", 1, 0.0).map_channels(|ch| {
            ch.samples
                .iter()
                .enumerate()
                .map(|(i, _)| match i % 5 {
                    0 => f64::NAN,
                    1 => 1e300,
                    2 => -0.0,
                    3 => 0.1 + 0.2,
                    _ => 5e-324,
                })
                .collect()
        });
        let path = dir.path().join("S6");
        store_subject(&rec, &path).unwrap();
        let back = load_subject(&path).unwrap();
        for id in ChannelId::ALL {
            let a = &rec.channel(id).samples;
            let b = &back.channel(id).samples;
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn store_then_load_is_identity(
            seconds in 1usize..4,
            values in proptest::collection::vec(proptest::prelude::any::<f64>(), 1..64),
            label_ids in proptest::collection::vec(0u8..8, 1..16),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let rec = constant_recording("S9", seconds, 0.0).map_channels(|ch| {
                (0..ch.samples.len()).map(|i| values[i % values.len()]).collect()
            });
            let labels = (0..seconds * 700).map(|i| Label::from_id(label_ids[i % label_ids.len()]).unwrap()).collect();
            let rec = SubjectRecording::new("S9", rec.channels().cloned(), LabelTrack::new(labels)).unwrap();
            let path = dir.path().join("S9");
            store_subject(&rec, &path).unwrap();
            let back = load_subject(&path).unwrap();
            proptest::prop_assert_eq!(&back.label_track, &rec.label_track);
            for id in ChannelId::ALL {
                let (a, b) = (rec.channel(id), back.channel(id));
                proptest::prop_assert_eq!(a.rate, b.rate);
                let same = a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
                proptest::prop_assert!(same && a.samples.len() == b.samples.len());
            }
        }
    }

    #[test]
    fn store_into_unwritable_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let res = store_subject(&constant_recording("S7", 1, 0.0), &blocker.join("S7"));
        assert!(matches!(res, Err(SignalError::Io { .. })));
    }

    #[test]
    fn durations() {
        assert_eq!(SampleRate::label().duration_of(42000), 60.0);
        assert_eq!(SampleRate::label().duration_of(700), 1.0);
        assert_eq!(SampleRate::label().duration_of(175), 0.25);
    }

    #[test]
    fn rate_parsing() {
        assert_eq!("64".parse::<SampleRate>().unwrap(), SampleRate::hz(64));
        assert_eq!("128/2".parse::<SampleRate>().unwrap(), SampleRate::hz(64));
        assert_eq!("0.5".parse::<SampleRate>().unwrap(), SampleRate::new(1, 2).unwrap());
        assert!("0".parse::<SampleRate>().is_err());
        assert!("abc".parse::<SampleRate>().is_err());
    }

    #[test]
    fn subject_ordering() {
        let mut ids = vec!["S10", "S2", "S17", "S3"];
        ids.sort_by_key(|s| subject_sort_key(s));
        assert_eq!(ids, ["S2", "S3", "S10", "S17"]);
    }

    #[test]
    fn label_ids_round_trip() {
        for id in 0..=7u8 {
            assert_eq!(Label::from_id(id).unwrap().id(), id);
        }
        assert!(Label::from_id(8).is_none());
    }
}
