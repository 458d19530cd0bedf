//! Patch embedding, a pre-norm Transformer body with per-head relative
//! position bias tables, and a per-feature prediction block that emits one
//! sigmoid score per timestamp.

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::Checkpoint;
pub use forward::{
    attention_head, embed_windows, forward_batch, predict_scores, relative_bias_matrix,
    transformer_layer,
};
pub use params::{Layer, LayerNormParams, Linear, ModelParams, Net};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Number of variables `D` per timestamp.
    pub data_dim: usize,
    /// Timestamps `N` per window.
    pub window_size: usize,
    /// Timestamps `p` folded into one embedded feature.
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Hidden width of both the per-layer MLP and the prediction block.
    pub mlp_hidden: usize,
}

impl ModelConfig {
    /// Full-size architecture: 6 layers, width 512, 8 heads, 2048 hidden.
    pub fn full(data_dim: usize, window_size: usize, patch_size: usize) -> Self {
        ModelConfig {
            data_dim,
            window_size,
            patch_size,
            embed_dim: 512,
            num_layers: 6,
            num_heads: 8,
            mlp_hidden: 2048,
        }
    }

    /// Half width and half depth of [`ModelConfig::full`], with window 100
    /// and patch 1.
    pub fn simplified(data_dim: usize) -> Self {
        ModelConfig {
            data_dim,
            window_size: 100,
            patch_size: 1,
            embed_dim: 256,
            num_layers: 3,
            num_heads: 8,
            mlp_hidden: 1024,
        }
    }

    /// Feature count `M = N / p`.
    pub fn features(&self) -> usize {
        self.window_size / self.patch_size
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn patch_width(&self) -> usize {
        self.patch_size * self.data_dim
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("data_dim", self.data_dim),
            ("window_size", self.window_size),
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("mlp_hidden", self.mlp_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        if self.window_size % self.patch_size != 0 {
            return Err(Error::Config(format!(
                "window size {} is not divisible by patch size {}",
                self.window_size, self.patch_size
            )));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "embedding dimension {} is not divisible by {} heads",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub(crate) fn to_pairs(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("data_dim", self.data_dim),
            ("window_size", self.window_size),
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("mlp_hidden", self.mlp_hidden),
        ]
    }

    pub(crate) fn from_pairs(pairs: &[(String, usize)]) -> Result<Self> {
        let get = |k: &str| {
            pairs
                .iter()
                .find(|(name, _)| name == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Checkpoint(format!("missing model field {k}")))
        };
        let cfg = ModelConfig {
            data_dim: get("data_dim")?,
            window_size: get("window_size")?,
            patch_size: get("patch_size")?,
            embed_dim: get("embed_dim")?,
            num_layers: get("num_layers")?,
            num_heads: get("num_heads")?,
            mlp_hidden: get("mlp_hidden")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
