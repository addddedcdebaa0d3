//! Deterministic synthetic recordings with a known stress signature.
//!
//! Every channel is a per-subject offset plus white Gaussian noise of unit
//! standard deviation. Stress segments raise the EDA mean by `separation`
//! noise deviations and, when `separation > 0`, double the BVP variance.
//! Offsets vanish under baseline normalization, so the signature is the only
//! thing separating the classes.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::features::WindowSpec;
use crate::seed::rng_from;
use crate::signal::{store_subject, ChannelId, ChannelSeries, Label, LabelTrack, SignalError, SubjectRecording, LABEL_RATE_HZ};

/// Unlabeled gap between consecutive conditions, in seconds.
pub const GAP_SECONDS: u32 = 5;

/// Conditions in recording order.
pub const CONDITIONS: [Label; 4] = [Label::Baseline, Label::Stress, Label::Amusement, Label::Meditation];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    /// Length of each condition segment.
    pub condition_seconds: u32,
    /// Stress shift of the EDA mean, in noise standard deviations.
    pub separation: f64,
    pub noise_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { n_subjects: 4, condition_seconds: 120, separation: 6.0, noise_seed: 0 }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return bad(format!("separation must be finite and non-negative, got {}", self.separation));
        }
        let window_s = WindowSpec::default().length().div_ceil(LABEL_RATE_HZ as usize);
        if (self.condition_seconds as usize) < window_s {
            return bad(format!("conditions of {} s hold no {window_s} s window", self.condition_seconds));
        }
        Ok(())
    }

    pub fn total_seconds(&self) -> u32 {
        CONDITIONS.len() as u32 * self.condition_seconds + (CONDITIONS.len() as u32 - 1) * GAP_SECONDS
    }

    pub fn subject_id(index: usize) -> String {
        format!("S{}", index + 2)
    }
}

/// `(label, start_s, end_s)` for every segment, gaps included.
pub fn segments(spec: &SynthSpec) -> Vec<(Label, u32, u32)> {
    let mut out = Vec::new();
    let mut t = 0;
    for (k, &label) in CONDITIONS.iter().enumerate() {
        if k > 0 {
            out.push((Label::Undefined, t, t + GAP_SECONDS));
            t += GAP_SECONDS;
        }
        out.push((label, t, t + spec.condition_seconds));
        t += spec.condition_seconds;
    }
    out
}

fn channel_offset(id: ChannelId, rng: &mut crate::seed::Rng) -> f64 {
    match id {
        ChannelId::AccX | ChannelId::AccY | ChannelId::AccZ => rng.random_range(-64.0..64.0),
        ChannelId::Bvp => rng.random_range(-5.0..5.0),
        ChannelId::Eda => rng.random_range(0.5..8.0),
        ChannelId::Temp => rng.random_range(30.0..35.0),
    }
}

/// Builds subject `index` in memory.
pub fn synth_subject(spec: &SynthSpec, index: usize) -> Result<SubjectRecording, SynthError> {
    spec.validate()?;
    let segs = segments(spec);
    let channels = ChannelId::ALL
        .iter()
        .map(|&id| {
            let mut rng = rng_from(spec.noise_seed, &[index as u64, id.index() as u64]);
            let offset = channel_offset(id, &mut rng);
            let rate = id.e4_rate();
            let mut samples = Vec::new();
            for &(label, start, end) in &segs {
                let n = rate.rescale_index((end - start) as usize, crate::signal::SampleRate::hz(1));
                let stressed = label == Label::Stress;
                let (shift, scale) = match id {
                    ChannelId::Eda if stressed => (spec.separation, 1.0),
                    ChannelId::Bvp if stressed && spec.separation > 0.0 => (0.0, std::f64::consts::SQRT_2),
                    _ => (0.0, 1.0),
                };
                samples.extend((0..n).map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    offset + shift + scale * z
                }));
            }
            ChannelSeries::new(id, rate, samples)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = segs
        .iter()
        .flat_map(|&(label, start, end)| std::iter::repeat_n(label, ((end - start) * LABEL_RATE_HZ) as usize))
        .collect();
    Ok(SubjectRecording::new(SynthSpec::subject_id(index), channels, LabelTrack::new(labels))?)
}

/// Writes every subject under `root` in the neutral format and returns the
/// subject directories.
pub fn generate(spec: &SynthSpec, root: &Path) -> Result<Vec<PathBuf>, SynthError> {
    spec.validate()?;
    (0..spec.n_subjects)
        .into_par_iter()
        .map(|i| {
            let dir = root.join(SynthSpec::subject_id(i));
            store_subject(&synth_subject(spec, i)?, &dir)?;
            Ok(dir)
        })
        .collect()
}
