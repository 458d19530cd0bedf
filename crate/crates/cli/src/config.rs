//! Flat `key = value` run configuration with dotted section keys.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown keys and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tsad_core::data::SineConfig;
use tsad_core::degradation::{DegradationConfig, OutlierKind};
use tsad_core::training::TrainConfig;
use tsad_core::{Error, ModelConfig, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Preset {
    Simplified,
    Full,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Raw text, echoed unchanged into output directories.
    pub text: String,
    pub seed: u64,
    pub preset: Preset,
    overrides: BTreeMap<String, usize>,
    pub train: TrainConfig,
    pub degradation: DegradationConfig,
    /// Set when any `degradation.*` key is given, so `min_len` keeps
    /// tracking the patch size otherwise.
    min_len_set: bool,
    pub sine: SineConfig,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub normalize: bool,
    pub resume: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub stride: usize,
    pub scores: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub coverage_kinds: Vec<OutlierKind>,
    pub coverage_total_prob: f64,
    pub coverage_data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            text: String::new(),
            seed: 0,
            preset: Preset::Simplified,
            overrides: BTreeMap::new(),
            train: TrainConfig::default(),
            degradation: DegradationConfig::default(),
            min_len_set: false,
            sine: SineConfig::default(),
            train_data: None,
            test_data: None,
            normalize: true,
            resume: None,
            checkpoint: None,
            stride: 16,
            scores: None,
            labels: None,
            coverage_kinds: OutlierKind::ALL.to_vec(),
            coverage_total_prob: 0.8,
            coverage_data_dir: None,
        }
    }
}

const MODEL_KEYS: [&str; 7] = [
    "data_dim",
    "window_size",
    "patch_size",
    "embed_dim",
    "num_layers",
    "num_heads",
    "mlp_hidden",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            text: text.to_string(),
            ..Default::default()
        };
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), i + 1) {
                return Err(Error::Config(format!("line {}: {key} already set on line {prev}", i + 1)));
            }
            cfg.set(key, value, base)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(e))))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let path = || -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let t = &mut self.train;
        let d = &mut self.degradation;
        let s = &mut self.sine;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "model.preset" => {
                self.preset = match v {
                    "simplified" => Preset::Simplified,
                    "full" => Preset::Full,
                    _ => return Err(Error::Config(format!("{key}: unknown preset {v:?}"))),
                }
            }
            k if k.strip_prefix("model.").is_some_and(|f| MODEL_KEYS.contains(&f)) => {
                self.overrides.insert(k["model.".len()..].to_string(), parse(key, v)?);
            }
            "train.batch_size" => t.batch_size = parse(key, v)?,
            "train.max_steps" => t.max_steps = parse(key, v)?,
            "train.base_lr" => t.base_lr = parse(key, v)?,
            "train.warmup_frac" => t.warmup_frac = parse(key, v)?,
            "train.clip_norm" => t.clip_norm = parse(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse(key, v)?,
            "train.keep_checkpoints" => t.keep_checkpoints = parse(key, v)?,
            "train.log_every" => t.log_every = parse(key, v)?,
            "train.beta1" => t.adamw.beta1 = parse(key, v)?,
            "train.beta2" => t.adamw.beta2 = parse(key, v)?,
            "train.eps" => t.adamw.eps = parse(key, v)?,
            "train.weight_decay" => t.adamw.weight_decay = parse(key, v)?,
            "train.resume" => self.resume = Some(path()),
            "degradation.p_soft" => d.p_soft = parse(key, v)?,
            "degradation.p_uniform" => d.p_uniform = parse(key, v)?,
            "degradation.p_peak" => d.p_peak = parse(key, v)?,
            "degradation.p_length" => d.p_length = parse(key, v)?,
            "degradation.max_len_frac" => d.max_len_frac = parse(key, v)?,
            "degradation.min_len" => {
                d.min_len = parse(key, v)?;
                self.min_len_set = true;
            }
            "degradation.column_rate" => d.column_rate = parse(key, v)?,
            "degradation.soft_weight_min" => d.soft_weight_range.0 = parse(key, v)?,
            "degradation.soft_weight_max" => d.soft_weight_range.1 = parse(key, v)?,
            "degradation.peak_scale_min" => d.peak_scale_range.0 = parse(key, v)?,
            "degradation.peak_scale_max" => d.peak_scale_range.1 = parse(key, v)?,
            "degradation.length_mode_prob" => d.length_mode_prob = parse(key, v)?,
            "data.train" => self.train_data = Some(path()),
            "data.test" => self.test_data = Some(path()),
            "data.normalize" => self.normalize = parse_bool(key, v)?,
            "sine.period" => s.period = parse(key, v)?,
            "sine.amplitude" => s.amplitude = parse(key, v)?,
            "sine.noise_std" => s.noise_std = parse(key, v)?,
            "sine.train_len" => s.train_len = parse(key, v)?,
            "sine.test_len" => s.test_len = parse(key, v)?,
            "sine.anomaly_rate" => s.anomaly_rate = parse(key, v)?,
            "sine.pattern_len" => s.pattern_len = parse(key, v)?,
            "sine.global_offset" => s.global_offset = parse(key, v)?,
            "sine.contextual_offset" => s.contextual_offset = parse(key, v)?,
            "sine.trend_height" => s.trend_height = parse(key, v)?,
            "score.checkpoint" => self.checkpoint = Some(path()),
            "score.stride" => self.stride = parse(key, v)?,
            "evaluate.scores" => self.scores = Some(path()),
            "evaluate.labels" => self.labels = Some(path()),
            "coverage.kinds" => {
                self.coverage_kinds = v
                    .split(',')
                    .map(|k| k.trim().parse())
                    .collect::<Result<_>>()?;
            }
            "coverage.total_prob" => self.coverage_total_prob = parse(key, v)?,
            "coverage.data_dir" => self.coverage_data_dir = Some(path()),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Model shape for data with `data_dim` columns. `model.data_dim`, when
    /// given, must agree.
    pub fn model(&self, data_dim: usize) -> Result<ModelConfig> {
        let mut m = match self.preset {
            Preset::Simplified => ModelConfig::simplified(data_dim),
            Preset::Full => ModelConfig::full(data_dim, 512, 4),
        };
        for (k, &v) in &self.overrides {
            match k.as_str() {
                "data_dim" if v != data_dim => {
                    return Err(Error::Data(format!(
                        "model.data_dim is {v} but the data has {data_dim} columns"
                    )))
                }
                "data_dim" => {}
                "window_size" => m.window_size = v,
                "patch_size" => m.patch_size = v,
                "embed_dim" => m.embed_dim = v,
                "num_layers" => m.num_layers = v,
                "num_heads" => m.num_heads = v,
                "mlp_hidden" => m.mlp_hidden = v,
                _ => unreachable!("filtered when parsing"),
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn degradation_for(&self, model: &ModelConfig) -> DegradationConfig {
        let mut d = self.degradation.clone();
        if !self.min_len_set {
            d.min_len = model.patch_size.max(2);
        }
        d
    }

    pub fn sine_config(&self) -> SineConfig {
        SineConfig {
            seed: self.seed,
            ..self.sine.clone()
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
