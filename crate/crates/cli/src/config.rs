//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! are applied on top through [`ExperimentConfig::set`], so both sources go
//! through the same parsing and validation.

use std::fmt::Write as _;
use std::path::PathBuf;

use affect_ssl::dataset::{FoldOptions, SequenceConfig};
use affect_ssl::features::WindowSpec;
use affect_ssl::harness::{LosoConfig, ModelKind};
use affect_ssl::models::NetShape;
use affect_ssl::pipeline::{sha256_hex, PrepConfig};

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_root: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub model: ModelKind,
    pub labeled_fraction: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    /// Use only the first `n` prepared subjects.
    pub subjects: Option<usize>,
    pub jobs: usize,
    pub window_length: usize,
    pub window_step: usize,
    pub sequence_steps: usize,
    pub min_coverage: f64,
    pub standardize: bool,
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub latent_dim: usize,
    pub generator_hidden: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = ModelKind::Sgan.default_train_config();
        let shape = NetShape::default();
        let window = WindowSpec::default();
        let seq = SequenceConfig::default();
        ExperimentConfig {
            dataset_root: PathBuf::from("data"),
            cache_dir: PathBuf::from("prepared"),
            output_dir: PathBuf::from("results"),
            model: ModelKind::Supervised,
            labeled_fraction: None,
            repeats: 1,
            seed: 0,
            subjects: None,
            jobs: 1,
            window_length: window.length(),
            window_step: window.step(),
            sequence_steps: seq.steps,
            min_coverage: seq.min_coverage,
            standardize: true,
            epochs: None,
            batch_size: train.batch_size,
            lr: train.lr,
            hidden: shape.hidden,
            dropout: shape.dropout,
            latent_dim: train.latent_dim,
            generator_hidden: train.generator_hidden,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError(format!("{key}: cannot parse {value:?}: {e}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "dataset_root" => self.dataset_root = PathBuf::from(v),
            "cache_dir" => self.cache_dir = PathBuf::from(v),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "model" => self.model = v.parse().map_err(ConfigError)?,
            "labeled_fraction" => self.labeled_fraction = Some(parse(key, v)?),
            "repeats" => self.repeats = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "subjects" => self.subjects = Some(parse(key, v)?),
            "jobs" => self.jobs = parse(key, v)?,
            "window_length" => self.window_length = parse(key, v)?,
            "window_step" => self.window_step = parse(key, v)?,
            "sequence_steps" => self.sequence_steps = parse(key, v)?,
            "min_coverage" => self.min_coverage = parse(key, v)?,
            "standardize" => self.standardize = parse(key, v)?,
            "epochs" => self.epochs = Some(parse(key, v)?),
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "latent_dim" => self.latent_dim = parse(key, v)?,
            "generator_hidden" => self.generator_hidden = parse(key, v)?,
            "config_version" if v == "1" => {}
            "config_version" => return Err(ConfigError(format!("unsupported config_version {v}"))),
            other => return Err(ConfigError(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(ConfigError(format!("line {}: duplicate key {key:?}", n + 1)));
            }
            seen.push(key);
            self.set(key, value).map_err(|e| ConfigError(format!("line {}: {}", n + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn prep(&self) -> Result<PrepConfig, ConfigError> {
        let window = WindowSpec::new(self.window_length, self.window_step).map_err(|e| ConfigError(e.to_string()))?;
        Ok(PrepConfig { window, sequence: SequenceConfig { steps: self.sequence_steps, min_coverage: self.min_coverage } })
    }

    pub fn loso(&self) -> Result<LosoConfig, ConfigError> {
        let mut train = self.model.default_train_config();
        if let Some(e) = self.epochs {
            train.epochs = e;
        }
        if let Some(f) = self.labeled_fraction {
            train.labeled_fraction = f;
        }
        train.batch_size = self.batch_size;
        train.lr = self.lr;
        train.seed = self.seed;
        train.latent_dim = self.latent_dim;
        train.generator_hidden = self.generator_hidden;
        train.validate().map_err(|e| ConfigError(e.to_string()))?;
        let shape = NetShape { steps: self.sequence_steps, hidden: self.hidden, dropout: self.dropout, ..NetShape::default() };
        Ok(LosoConfig { shape, train, fold: FoldOptions { standardize: self.standardize } })
    }

    /// Checks every range constraint; paths are checked by the commands that
    /// use them.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError(m.to_string()));
        if self.repeats == 0 || self.jobs == 0 {
            return bad("repeats and jobs must be positive");
        }
        if self.subjects.is_some_and(|n| n < 2) {
            return bad("subjects must be at least 2");
        }
        if self.sequence_steps == 0 || self.hidden == 0 {
            return bad("sequence_steps and hidden must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return bad("min_coverage must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        self.prep()?;
        self.loso()?;
        Ok(())
    }

    /// Every setting as `key = value` lines, in a fixed order. Loading this
    /// text reproduces the configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::from("config_version = 1\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dataset_root", self.dataset_root.display().to_string());
        kv("cache_dir", self.cache_dir.display().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("model", self.model.to_string());
        if let Some(f) = self.labeled_fraction {
            kv("labeled_fraction", format!("{f:?}"));
        }
        kv("repeats", self.repeats.to_string());
        kv("seed", self.seed.to_string());
        if let Some(n) = self.subjects {
            kv("subjects", n.to_string());
        }
        kv("jobs", self.jobs.to_string());
        kv("window_length", self.window_length.to_string());
        kv("window_step", self.window_step.to_string());
        kv("sequence_steps", self.sequence_steps.to_string());
        kv("min_coverage", format!("{:?}", self.min_coverage));
        kv("standardize", self.standardize.to_string());
        if let Some(e) = self.epochs {
            kv("epochs", e.to_string());
        }
        kv("batch_size", self.batch_size.to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("hidden", self.hidden.to_string());
        kv("dropout", format!("{:?}", self.dropout));
        kv("latent_dim", self.latent_dim.to_string());
        kv("generator_hidden", self.generator_hidden.to_string());
        s
    }

    /// Hash of everything that changes results. Paths, job count and the
    /// repeat count are left out so that a run can be resumed from another
    /// directory, with more threads, or extended with extra repeats.
    pub fn results_hash(&self) -> String {
        let relevant: String = self
            .canonical()
            .lines()
            .filter(|l| {
                let key = l.split('=').next().unwrap_or("").trim();
                !matches!(key, "dataset_root" | "cache_dir" | "output_dir" | "jobs" | "repeats")
            })
            .map(|l| format!("{l}\n"))
            .collect();
        sha256_hex(relevant.as_bytes())
    }
}
