use dagforecast_core::data::SynthConfig;
use dagforecast_core::search::SearchConfig;
use dagforecast_core::trainer::TrainConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Environment variable overriding `search.workers`.
pub const WORKERS_ENV: &str = "DAGFORECAST_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ssea,
    Rs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ssea => "ssea",
            Algorithm::Rs => "rs",
        }
    }
}

fn default_split() -> [f64; 3] {
    [0.7, 0.15, 0.15]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub output_dir: PathBuf,
    /// Adds the CNN/MLP seed genotype to the initial population.
    #[serde(default)]
    pub inject_seed: bool,
    pub dataset: DatasetConfig,
    pub search: SearchConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Ssea
}

/// The subset of a run config that `evaluate` reads.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EvalConfig {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub dataset: Option<SplitOnly>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SplitOnly {
    #[serde(default = "default_split")]
    pub split: [f64; 3],
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    toml::from_str(&read(path)?).map_err(|e| format!("{}: {}", path.display(), e.message().trim_end()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses the worker override; `None` when unset.
pub fn workers_override(value: Option<String>) -> Result<Option<usize>, String> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")),
        },
    }
}

impl RunConfig {
    /// Loads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let mut cfg: RunConfig = parse(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        if let Some(csv) = &cfg.dataset.csv {
            cfg.dataset.csv = Some(resolve(base, csv));
        }
        if let Some(n) = workers_override(std::env::var(WORKERS_ENV).ok())? {
            cfg.search.workers = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        match (&self.dataset.csv, &self.dataset.synth) {
            (Some(_), Some(_)) => return Err("dataset: set exactly one of `csv` and `synth`, not both".into()),
            (None, None) => return Err("dataset: one of `csv` or `synth` is required".into()),
            _ => {}
        }
        self.search.validate().map_err(|e| format!("search: {e}"))?;
        self.train.validate().map_err(|e| format!("train: {e}"))?;
        Ok(())
    }
}

impl EvalConfig {
    pub fn load(path: &Path) -> Result<EvalConfig, String> {
        let cfg: EvalConfig = parse(path)?;
        cfg.train.validate().map_err(|e| format!("train: {e}"))?;
        Ok(cfg)
    }

    pub fn split(&self) -> [f64; 3] {
        self.dataset.as_ref().map_or_else(default_split, |d| d.split)
    }
}

pub fn load_synth(path: &Path) -> Result<SynthConfig, String> {
    parse(path)
}
