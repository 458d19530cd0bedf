use super::params::{Layer, Linear, ModelParams, Net};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{toeplitz_values, Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn linear<T: Scalar>(g: &mut Graph<T>, x: Var, l: &Linear<Var>) -> Result<Var> {
    let y = g.matmul(x, l.weight)?;
    g.add_row(y, l.bias)
}

/// `B[i][j] = table[j − i]`, with the table indexed from offset `−(m−1)`.
pub fn relative_bias_matrix<T: Scalar>(table: &[T], m: usize) -> Result<Tensor<T>> {
    if m == 0 || table.len() != 2 * m - 1 {
        return Err(Error::shape(
            "relative_bias_matrix",
            format!("table of {} for {m} features", table.len()),
        ));
    }
    Tensor::new(&[m, m], toeplitz_values(table, m))
}

/// Splits each `N×D` window into `M` patches of `p` rows, flattens every
/// patch to `p·D` values and projects it to the embedding width. Windows are
/// stacked along rows, giving `(B·M)×E`.
pub fn embed_windows<T: Scalar>(
    g: &mut Graph<T>,
    windows: &[Var],
    embed: &Linear<Var>,
    cfg: &ModelConfig,
) -> Result<Var> {
    let (n, d) = (cfg.window_size, cfg.data_dim);
    let mut patches = Vec::with_capacity(windows.len());
    for &w in windows {
        if g.value(w).len() != n * d {
            return Err(Error::shape(
                "embed_window",
                format!(
                    "window {:?} for N = {n}, D = {d}",
                    g.value(w).shape()
                ),
            ));
        }
        patches.push(g.reshape(w, &[cfg.features(), cfg.patch_width()])?);
    }
    let stacked = if patches.len() == 1 {
        patches[0]
    } else {
        g.concat_rows(&patches)?
    };
    linear(g, stacked, embed)
}

/// `softmax(Q·Kᵀ/√d + B)·V` for one head.
pub fn attention_head<T: Scalar>(g: &mut Graph<T>, q: Var, k: Var, v: Var, bias: Var) -> Result<Var> {
    let d = g.value(q).dims2().1;
    let logits = g.matmul_t(q, k)?;
    let logits = g.scale(logits, T::one() / T::of(d as f64).sqrt())?;
    let logits = g.add(logits, bias)?;
    let weights = g.softmax_rows(logits)?;
    g.matmul(weights, v)
}

/// Pre-norm residual block over a stack of `batch` windows:
/// `x + MSA(LN(x))`, then `x + MLP(LN(x))`.
pub fn transformer_layer<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    layer: &Layer<Var>,
    cfg: &ModelConfig,
    batch: usize,
) -> Result<Var> {
    let (rows, e) = g.value(x).dims2();
    let m = cfg.features();
    if rows != batch * m || e != cfg.embed_dim {
        return Err(Error::shape(
            "transformer_layer",
            format!("{rows}x{e} for batch {batch} of {m}x{}", cfg.embed_dim),
        ));
    }
    let hd = cfg.head_dim();

    let h = g.layer_norm(x, layer.ln_attn.gamma, layer.ln_attn.beta)?;
    let qkv = linear(g, h, &layer.qkv)?;
    let biases = layer
        .rel_bias
        .iter()
        .map(|&t| g.toeplitz(t, m))
        .collect::<Result<Vec<_>>>()?;
    let mut per_window = Vec::with_capacity(batch);
    for b in 0..batch {
        let r = b * m..(b + 1) * m;
        let mut heads = Vec::with_capacity(cfg.num_heads);
        for (hi, &bias) in biases.iter().enumerate() {
            let c = hi * hd;
            let q = g.block(qkv, r.clone(), c..c + hd)?;
            let k = g.block(qkv, r.clone(), e + c..e + c + hd)?;
            let v = g.block(qkv, r.clone(), 2 * e + c..2 * e + c + hd)?;
            heads.push(attention_head(g, q, k, v, bias)?);
        }
        per_window.push(if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? });
    }
    let attn = if batch == 1 { per_window[0] } else { g.concat_rows(&per_window)? };
    let attn = linear(g, attn, &layer.proj)?;
    let x = g.add(x, attn)?;

    let h = g.layer_norm(x, layer.ln_mlp.gamma, layer.ln_mlp.beta)?;
    let h = linear(g, h, &layer.fc1)?;
    let h = g.gelu(h)?;
    let h = linear(g, h, &layer.fc2)?;
    g.add(x, h)
}

/// Maps every latent feature through `E → hidden → p` and squashes to
/// `(0, 1)`; the result is reshaped to `batch × N`.
pub fn predict_scores<T: Scalar>(
    g: &mut Graph<T>,
    latent: Var,
    head_fc1: &Linear<Var>,
    head_fc2: &Linear<Var>,
    cfg: &ModelConfig,
    batch: usize,
) -> Result<Var> {
    let h = linear(g, latent, head_fc1)?;
    let h = g.gelu(h)?;
    let logits = linear(g, h, head_fc2)?;
    let scores = g.sigmoid(logits)?;
    g.reshape(scores, &[batch, cfg.window_size])
}

/// Full network on a batch of windows; returns `batch × N` scores.
pub fn forward_batch<T: Scalar>(
    g: &mut Graph<T>,
    net: &Net<Var>,
    cfg: &ModelConfig,
    windows: &[Var],
) -> Result<Var> {
    let batch = windows.len();
    let mut x = embed_windows(g, windows, &net.embed, cfg)?;
    for layer in &net.layers {
        x = transformer_layer(g, x, layer, cfg, batch)?;
    }
    predict_scores(g, x, &net.head_fc1, &net.head_fc2, cfg, batch)
}

impl<T: Scalar> ModelParams<T> {
    /// Scores a batch of row-major `N×D` windows.
    pub fn score_windows(&self, windows: &[&[T]]) -> Result<Vec<Vec<T>>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let cfg = self.config();
        let mut g = Graph::new();
        let (net, _) = self.bind(&mut g)?;
        let vars = windows
            .iter()
            .map(|w| {
                if w.len() != cfg.window_size * cfg.data_dim {
                    return Err(Error::shape(
                        "forward",
                        format!(
                            "window of {} values, expected {}x{}",
                            w.len(),
                            cfg.window_size,
                            cfg.data_dim
                        ),
                    ));
                }
                g.constant(Tensor::new(&[cfg.window_size, cfg.data_dim], w.to_vec())?)
            })
            .collect::<Result<Vec<_>>>()?;
        let out = forward_batch(&mut g, &net, cfg, &vars)?;
        Ok(g
            .value(out)
            .data()
            .chunks(cfg.window_size)
            .map(<[T]>::to_vec)
            .collect())
    }

    pub fn score_window(&self, window: &[T]) -> Result<Vec<T>> {
        Ok(self.score_windows(&[window])?.remove(0))
    }
}
