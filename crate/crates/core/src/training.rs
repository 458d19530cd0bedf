//! Self-supervised training: sample windows, degrade them, score them and
//! minimise the binary cross entropy against the degradation labels.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{sample_window, TimeSeries};
use crate::degradation::{degrade, DegradationConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{forward_batch, Checkpoint, ModelConfig, ModelParams};
use crate::optim::{clip_grad_norm, lr_at_step, AdamW, AdamWConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    pub base_lr: f64,
    pub warmup_frac: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: u64,
    pub keep_checkpoints: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Record a log entry every this many steps (and always at the last).
    pub log_every: u64,
    pub adamw: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            max_steps: 20_000,
            base_lr: 1e-4,
            warmup_frac: 0.1,
            clip_norm: 1.0,
            seed: 0,
            checkpoint_every: 1000,
            keep_checkpoints: 3,
            checkpoint_dir: None,
            log_every: 100,
            adamw: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Mini-batch 16 for 150K steps.
    pub fn full_scale() -> Self {
        TrainConfig {
            batch_size: 16,
            max_steps: 150_000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return Err(Error::Config(format!(
                "train.warmup_frac {} outside (0, 1)",
                self.warmup_frac
            )));
        }
        if !(self.base_lr > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("train.base_lr and train.clip_norm must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("train.log_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "step,loss,lr,grad_norm,seconds";

    pub fn csv_row(e: &LogEntry) -> String {
        format!("{},{},{},{},{:.3}", e.step, e.loss, e.lr, e.grad_norm, e.seconds)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.entries {
            s.push_str(&Self::csv_row(e));
            s.push('\n');
        }
        s
    }

    /// Appends entries to `path`, writing the header when the file is new.
    pub fn append_csv(path: &Path, entries: &[LogEntry]) -> Result<()> {
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "{}", Self::CSV_HEADER)?;
        }
        for e in entries {
            writeln!(f, "{}", Self::csv_row(e))?;
        }
        Ok(())
    }
}

/// Mean binary cross entropy of one batch: `scores` and `labels` are `batch × N`.
pub fn training_objective<T: Scalar>(scores: &[Vec<T>], labels: &[Vec<u8>]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("training_objective", "batch sizes differ"));
    }
    let mut g = Graph::new();
    let flat: Vec<T> = scores.iter().flatten().copied().collect();
    let ys: Vec<T> = labels.iter().flatten().map(|&l| T::of(f64::from(l))).collect();
    let n = flat.len();
    let s = g.constant(Tensor::new(&[n], flat)?)?;
    let l = g.bce(s, &ys)?;
    Ok(g.value(l).data()[0].as_f64())
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, step, item)`.
pub fn substream(seed: u64, step: u64, item: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ step) ^ item))
}

/// Generator used for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    substream(seed, u64::MAX, u64::MAX)
}

pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub optimizer: AdamW<T>,
    pub log: TrainLog,
    pub last_checkpoint: Option<PathBuf>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            params: self.params.clone(),
            step: self.optimizer.step,
            optimizer: Some(self.optimizer.clone()),
        }
    }
}

pub struct Trainer<'a, T> {
    params: ModelParams<T>,
    optimizer: AdamW<T>,
    data: &'a TimeSeries,
    cfg: TrainConfig,
    degradation: DegradationConfig,
    log: TrainLog,
    checkpoints: Vec<PathBuf>,
    started: Instant,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(
        model: &ModelConfig,
        data: &'a TimeSeries,
        cfg: &TrainConfig,
        degradation: &DegradationConfig,
    ) -> Result<Self> {
        let params = ModelParams::init(model, &mut init_rng(cfg.seed))?;
        let optimizer = AdamW::new(cfg.adamw, params.tensors());
        Self::from_parts(params, optimizer, data, cfg, degradation)
    }

    /// Continues from a checkpoint; step numbering resumes after its step.
    pub fn resume(
        ck: Checkpoint<T>,
        data: &'a TimeSeries,
        cfg: &TrainConfig,
        degradation: &DegradationConfig,
    ) -> Result<Self> {
        let optimizer = match ck.optimizer {
            Some(o) => o,
            None => {
                let mut o = AdamW::new(cfg.adamw, ck.params.tensors());
                o.step = ck.step;
                o
            }
        };
        Self::from_parts(ck.params, optimizer, data, cfg, degradation)
    }

    fn from_parts(
        params: ModelParams<T>,
        optimizer: AdamW<T>,
        data: &'a TimeSeries,
        cfg: &TrainConfig,
        degradation: &DegradationConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        degradation.validate()?;
        let mc = params.config();
        if data.dim() != mc.data_dim {
            return Err(Error::Data(format!(
                "training data has {} columns, model expects {}",
                data.dim(),
                mc.data_dim
            )));
        }
        if data.len() < mc.window_size {
            return Err(Error::Data(format!(
                "training data has {} rows, window size is {}",
                data.len(),
                mc.window_size
            )));
        }
        let longest = (degradation.max_len_frac * mc.window_size as f64).floor() as usize;
        if degradation.total_prob() > 0.0 && degradation.min_len > longest {
            return Err(Error::Config(format!(
                "degradation.min_len {} exceeds the longest interval {longest} of a {}-step window",
                degradation.min_len, mc.window_size
            )));
        }
        Ok(Trainer {
            params,
            optimizer,
            data,
            cfg: cfg.clone(),
            degradation: degradation.clone(),
            log: TrainLog::default(),
            checkpoints: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    /// Updates applied so far.
    pub fn step_index(&self) -> u64 {
        self.optimizer.step
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Degraded windows for batch `step` (1-based), deterministic in the seed.
    pub fn batch(&self, step: u64) -> Result<Vec<crate::degradation::DegradedWindow>> {
        let n = self.params.config().window_size;
        (0..self.cfg.batch_size as u64)
            .map(|b| {
                let mut rng = substream(self.cfg.seed, step, b);
                let w = sample_window(self.data, n, &mut rng)?;
                degrade(&w, self.data, &self.degradation, &mut rng)
            })
            .collect()
    }

    /// Runs one optimizer update and returns its log entry.
    pub fn step(&mut self) -> Result<LogEntry> {
        let step = self.optimizer.step + 1;
        let batch = self.batch(step)?;
        let mc = self.params.config().clone();

        let mut g = Graph::new();
        let mut labels = Vec::with_capacity(batch.len() * mc.window_size);
        let forward = |g: &mut Graph<T>, labels: &mut Vec<T>| -> Result<_> {
            let (net, vars) = self.params.bind(g)?;
            let mut windows = Vec::with_capacity(batch.len());
            for dw in &batch {
                let data = dw.values.iter().map(|&v| T::of(v)).collect();
                windows.push(g.constant(Tensor::new(&[mc.window_size, mc.data_dim], data)?)?);
                labels.extend(dw.labels.iter().map(|&l| T::of(f64::from(l))));
            }
            let scores = forward_batch(g, &net, &mc, &windows)?;
            let loss = g.bce(scores, labels)?;
            Ok((loss, vars))
        };
        let (loss_var, vars) = match forward(&mut g, &mut labels) {
            Ok(r) => r,
            Err(e) if e.is_numeric() => return Err(self.nan_abort(step)),
            Err(e) => return Err(e),
        };
        let loss = g.value(loss_var).data()[0].as_f64();
        if !loss.is_finite() {
            return Err(self.nan_abort(step));
        }

        let mut grads_all = g.backward(loss_var);
        let mut grads: Vec<Tensor<T>> = vars
            .iter()
            .zip(self.params.tensors())
            .map(|(&v, p)| grads_all.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        drop(g);
        let grad_norm = clip_grad_norm(&mut grads, self.cfg.clip_norm).as_f64();
        let lr = lr_at_step(step, self.cfg.max_steps, self.cfg.base_lr, self.cfg.warmup_frac);
        if let Err(e) = self.optimizer.step(&mut self.params.tensors_mut(), &grads, lr) {
            return Err(if e.is_numeric() { self.nan_abort(step) } else { e });
        }
        Ok(LogEntry {
            step,
            loss,
            lr,
            grad_norm,
            seconds: self.started.elapsed().as_secs_f64(),
        })
    }

    fn nan_abort(&self, step: u64) -> Error {
        log::error!("non-finite loss at step {step}; stopping");
        Error::NonFiniteLoss {
            step,
            last_checkpoint: self.checkpoints.last().cloned(),
        }
    }

    fn save_periodic(&mut self) -> Result<()> {
        let Some(dir) = self.cfg.checkpoint_dir.clone() else {
            return Ok(());
        };
        let step = self.optimizer.step;
        let path = dir.join(format!("checkpoint-{step:08}.bin"));
        Checkpoint {
            params: self.params.clone(),
            step,
            optimizer: Some(self.optimizer.clone()),
        }
        .save(&path)?;
        self.checkpoints.push(path);
        while self.checkpoints.len() > self.cfg.keep_checkpoints.max(1) {
            let old = self.checkpoints.remove(0);
            let _ = fs::remove_file(old);
        }
        Ok(())
    }

    /// Trains until `max_steps`, calling `on_log` for every logged entry.
    pub fn run(mut self, mut on_log: impl FnMut(&LogEntry)) -> Result<TrainOutcome<T>> {
        while self.optimizer.step < self.cfg.max_steps {
            let entry = self.step()?;
            let s = entry.step;
            if s % self.cfg.log_every == 0 || s == self.cfg.max_steps {
                on_log(&entry);
                self.log.entries.push(entry);
            }
            if self.cfg.checkpoint_every > 0 && s % self.cfg.checkpoint_every == 0 {
                self.save_periodic()?;
            }
        }
        Ok(TrainOutcome {
            params: self.params,
            optimizer: self.optimizer,
            log: self.log,
            last_checkpoint: self.checkpoints.last().cloned(),
        })
    }
}

/// Trains a freshly initialized model.
pub fn train<T: Scalar>(
    model: &ModelConfig,
    data: &TimeSeries,
    cfg: &TrainConfig,
    degradation: &DegradationConfig,
) -> Result<TrainOutcome<T>> {
    Trainer::new(model, data, cfg, degradation)?.run(|_| {})
}
