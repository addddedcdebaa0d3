mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affect_ssl::gradcheck::{self, GRAD_TOLERANCE};
use affect_ssl::harness::{run_loso_with, DirSink, HarnessError};
use affect_ssl::pipeline::{cache_dir, load_prepared, prepare_dataset, summarize_dataset, PipelineError};
use affect_ssl::signal::{list_subject_dirs, load_subject};
use affect_ssl::synth::{self, SynthError, SynthSpec};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

const VERSION: &str = concat!("affect-ssl v", env!("CARGO_PKG_VERSION"));
const SEED_ENV: &str = "AFFECT_SSL_SEED";

#[derive(Parser)]
#[command(name = "affect-ssl", version, about = "Stress detection experiments on wrist-sensor recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load every subject and check its invariants.
    Validate { root: PathBuf },
    /// Write label counts, sample counts and channel histograms as CSV.
    Summarize {
        root: PathBuf,
        #[arg(long, default_value = "summary")]
        out: PathBuf,
    },
    /// Extract feature frames and sequences into the cache.
    Prepare(ExperimentArgs),
    /// Leave-one-subject-out evaluation over prepared data.
    Run(ExperimentArgs),
    /// Finite-difference check of every hand-written gradient.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic dataset with a known stress effect.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthSpec::default().n_subjects)]
        subjects: usize,
        #[arg(long, default_value_t = SynthSpec::default().condition_seconds)]
        condition_seconds: u32,
        #[arg(long, default_value_t = SynthSpec::default().separation)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
}

/// Settings shared by `prepare` and `run`. Flags override the config file.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_root: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    labeled_fraction: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    subjects: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    window_length: Option<String>,
    #[arg(long)]
    window_step: Option<String>,
    #[arg(long)]
    sequence_steps: Option<String>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

enum Failure {
    Data(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dataset(_) => Failure::Data(e.to_string()),
            HarnessError::InvalidArgument(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl ExperimentArgs {
    /// Built-in defaults, then the seed environment variable, then the
    /// config file, then flags.
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::default();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.set("seed", &seed).map_err(|e| Failure::Config(format!("{SEED_ENV}: {e}")))?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        }
        let paths = [("dataset_root", &self.dataset_root), ("cache_dir", &self.cache_dir), ("output_dir", &self.output_dir)];
        for (key, value) in paths {
            if let Some(p) = value {
                cfg.set(key, &p.to_string_lossy())?;
            }
        }
        let flags = [
            ("model", &self.model),
            ("labeled_fraction", &self.labeled_fraction),
            ("repeats", &self.repeats),
            ("seed", &self.seed),
            ("subjects", &self.subjects),
            ("jobs", &self.jobs),
            ("epochs", &self.epochs),
            ("window_length", &self.window_length),
            ("window_step", &self.window_step),
            ("sequence_steps", &self.sequence_steps),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.sets {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_validate(root: &Path) -> Result<(), Failure> {
    let dirs = list_subject_dirs(root).map_err(|e| Failure::Data(e.to_string()))?;
    if dirs.is_empty() {
        return Err(Failure::Data(format!("no subjects found under {}", root.display())));
    }
    let mut bad = 0;
    for dir in &dirs {
        let name = dir.file_name().unwrap_or_default().to_string_lossy();
        match load_subject(dir) {
            Ok(rec) => {
                let counts: Vec<String> =
                    rec.channels().map(|c| format!("{}={}", c.id.name(), c.samples.len())).collect();
                println!(
                    "{name}: OK duration={:.1}s labels={} {}",
                    rec.duration_seconds(),
                    rec.label_track().len(),
                    counts.join(" ")
                );
            }
            Err(e) => {
                bad += 1;
                println!("{name}: ERROR {e}");
            }
        }
    }
    if bad > 0 {
        return Err(Failure::Data(format!("{bad} of {} subjects failed validation", dirs.len())));
    }
    Ok(())
}

fn cmd_summarize(root: &Path, out: &Path) -> Result<(), Failure> {
    let summary = summarize_dataset(root)?;
    let metadata = [("dataset_root".to_string(), root.display().to_string()), ("version".to_string(), VERSION.to_string())];
    for path in summary.write(out, &metadata)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_prepare(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let prep = cfg.prep()?;
    for s in prepare_dataset(&cfg.dataset_root, &cfg.cache_dir, &prep)? {
        let state = if s.cache_hit { "cache hit" } else { "cache miss" };
        println!("{}: {state} frames={} sequences={}", s.subject_id, s.frame_count, s.sequence_count);
    }
    println!("prepared: {}", cache_dir(&cfg.cache_dir, &prep).display());
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let prep = cfg.prep()?;
    let loso = cfg.loso()?;
    let dir = cache_dir(&cfg.cache_dir, &prep);
    if !dir.is_dir() {
        return Err(Failure::Data(format!("no prepared data at {}; run `prepare` first", dir.display())));
    }
    let mut subjects = load_prepared(&dir)?;
    if let Some(n) = cfg.subjects {
        if n > subjects.len() {
            return Err(Failure::Data(format!("{n} subjects requested, {} prepared", subjects.len())));
        }
        subjects.truncate(n);
    }
    let hash = cfg.results_hash();
    let model_dir = cfg.output_dir.join(cfg.model.name());
    let mut sink = DirSink::new(&model_dir, hash.clone())?;
    write_file(&model_dir.join("config.txt"), &cfg.canonical())?;
    let table = run_loso_with(cfg.model, &subjects, &loso, cfg.repeats, cfg.seed, cfg.jobs, &mut sink)?;

    let ids: Vec<&str> = subjects.iter().map(|s| s.subject_id.as_str()).collect();
    let metadata = vec![
        ("model".to_string(), cfg.model.to_string()),
        ("labeled_fraction".to_string(), loso.train.labeled_fraction.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("subjects".to_string(), ids.join(" ")),
        ("config_hash".to_string(), hash),
        ("prep_hash".to_string(), prep.hash()),
        ("version".to_string(), VERSION.to_string()),
    ];
    let path = cfg.output_dir.join(format!("table_{}.csv", cfg.model.name()));
    write_file(&path, &table.to_csv(&metadata))?;
    let m = &table.mean;
    println!("mean accuracy={:.4} auc={:.4} f1={:.4}", m.accuracy, m.auc, m.f1);
    if table.collapsed_runs() > 0 {
        println!("warning: {} runs predicted a single class", table.collapsed_runs());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_grad_check(seed: u64) -> Result<(), Failure> {
    let checks = gradcheck::run_all(seed);
    let mut worst = 0.0f64;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("{}: {status} max_rel_error={:.3e} checked={}", c.name, c.report.max_rel_error, c.report.checked);
        worst = worst.max(c.report.max_rel_error);
    }
    println!("max relative error: {worst:.3e} (tolerance {GRAD_TOLERANCE:e})");
    match checks.iter().filter(|c| !c.passed()).count() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!("{n} gradient checks failed"))),
    }
}

fn cmd_synth(spec: SynthSpec, out: &Path) -> Result<(), Failure> {
    let dirs = synth::generate(&spec, out).map_err(|e| match e {
        SynthError::InvalidSpec(_) => Failure::Config(e.to_string()),
        SynthError::Signal(_) => Failure::Runtime(e.to_string()),
    })?;
    println!("wrote {} subjects to {}", dirs.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { root } => cmd_validate(&root),
        Command::Summarize { root, out } => cmd_summarize(&root, &out),
        Command::Prepare(args) => cmd_prepare(&args.resolve()?),
        Command::Run(args) => cmd_run(&args.resolve()?),
        Command::GradCheck { seed } => cmd_grad_check(seed),
        Command::Synth { out, subjects, condition_seconds, separation, noise_seed } => {
            cmd_synth(SynthSpec { n_subjects: subjects, condition_seconds, separation, noise_seed }, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Data(m) | Failure::Config(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
