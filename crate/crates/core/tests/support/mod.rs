//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsad_core::model::forward_batch;
use tsad_core::data::TimeSeries;
use tsad_core::degradation::{degrade, DegradationConfig, DegradedWindow, OutlierKind};
use tsad_core::{Graph, ModelConfig, ModelParams, Result, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖, tiny)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Reduces any node to a scalar by a fixed random contraction so every
/// output element reaches the gradient.
pub fn contract(g: &mut Graph<f64>, out: Var, weights: &Tensor<f64>) -> Result<Var> {
    let n = g.value(out).len();
    let flat = g.reshape(out, &[1, n])?;
    let w = g.constant(weights.clone().reshaped(&[n, 1])?)?;
    g.matmul(flat, w)
}

/// Largest relative error between reverse-mode and central-difference
/// gradients of `f` over every input.
pub fn check_gradients(
    inputs: &[Tensor<f64>],
    h: f64,
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
) -> f64 {
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.variable(x.clone()).unwrap()).collect();
        let out = f(&mut g, &vars).unwrap();
        assert_eq!(g.value(out).len(), 1, "objective must be scalar");
        g.value(out).data()[0]
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.variable(x.clone()).unwrap()).collect();
    let out = f(&mut g, &vars).unwrap();
    let grads = g.backward(out);

    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[i])
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; x.len()]);
        let mut numeric = vec![0.0; x.len()];
        let mut xs = inputs.to_vec();
        for k in 0..x.len() {
            let orig = xs[i].data()[k];
            xs[i].data_mut()[k] = orig + h;
            let up = eval(&xs);
            xs[i].data_mut()[k] = orig - h;
            let down = eval(&xs);
            xs[i].data_mut()[k] = orig;
            numeric[k] = (up - down) / (2.0 * h);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

/// M=4 features (N=8, p=2), E=8, H=2, L=1, D=3.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        data_dim: 3,
        window_size: 8,
        patch_size: 2,
        embed_dim: 8,
        num_layers: 1,
        num_heads: 2,
        mlp_hidden: 12,
    }
}

/// Tiny model with every parameter (bias tables included) randomized.
pub fn tiny_params(seed: u64) -> ModelParams<f64> {
    let mut r = rng(seed);
    let mut p = ModelParams::<f64>::init(&tiny_config(), &mut r).unwrap();
    for t in p.tensors_mut() {
        for v in t.data_mut() {
            *v += r.random_range(-0.3..0.3);
        }
    }
    p
}

/// Relative FD error of the composed model's BCE loss over a batch of two
/// windows, taken with respect to every parameter tensor.
pub fn composed_model_error(seed: u64, h: f64) -> f64 {
    let params = tiny_params(seed);
    let cfg = params.config().clone();
    let mut r = rng(seed ^ 0xABCD);
    let windows: Vec<Tensor<f64>> = (0..2)
        .map(|_| random_tensor(&[cfg.window_size, cfg.data_dim], 1.5, &mut r))
        .collect();
    let labels: Vec<f64> = (0..2 * cfg.window_size).map(|_| f64::from(r.random_bool(0.3) as u8)).collect();
    let names = params.names().to_vec();
    check_gradients(params.tensors(), h, |g, vars| {
        let named = names.iter().cloned().zip(vars.iter().map(|&v| g.value(v).clone())).collect();
        let p = ModelParams::from_named(&cfg, named)?;
        let net = p.net().map(&|i| vars[i]);
        let ws: Vec<Var> = windows.iter().map(|w| g.constant(w.clone()).unwrap()).collect();
        let scores = forward_batch(g, &net, &cfg, &ws)?;
        g.bce(scores, &labels)
    })
}

/// Loop oracle for confusion counts.
pub fn naive_confusion(labels: &[u8], preds: &[u8]) -> (u64, u64, u64) {
    let mut c = (0, 0, 0);
    for i in 0..labels.len() {
        if labels[i] == 1 && preds[i] == 1 {
            c.0 += 1;
        }
        if labels[i] == 0 && preds[i] == 1 {
            c.1 += 1;
        }
        if labels[i] == 1 && preds[i] == 0 {
            c.2 += 1;
        }
    }
    c
}

pub fn naive_f1(c: (u64, u64, u64)) -> f64 {
    let (tp, fp, fn_) = (c.0 as f64, c.1 as f64, c.2 as f64);
    if tp + fp + fn_ == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// O(P·N) pairwise AUROC.
pub fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Point adjustment written as a scan: a detected point spreads to its
/// whole label run in both directions.
pub fn hand_point_adjust(labels: &[u8], preds: &[u8]) -> Vec<u8> {
    let mut out = preds.to_vec();
    for t in 0..labels.len() {
        if labels[t] == 1 && preds[t] == 1 {
            let mut l = t;
            while l > 0 && labels[l - 1] == 1 {
                l -= 1;
            }
            let mut r = t;
            while r + 1 < labels.len() && labels[r + 1] == 1 {
                r += 1;
            }
            for v in &mut out[l..=r] {
                *v = 1;
            }
        }
    }
    out
}

/// F1 at `score >= theta`, optionally point adjusted, via the loop oracles.
pub fn naive_f1_at(scores: &[f64], labels: &[u8], theta: f64, adjust: bool) -> f64 {
    let mut preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= theta)).collect();
    if adjust {
        preds = hand_point_adjust(labels, &preds);
    }
    naive_f1(naive_confusion(labels, &preds))
}

/// Random labeled instance with coarse scores (so ties occur) and runs of
/// anomalies.
pub fn random_instance(len: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<u8>) {
    let levels = rng.random_range(2..40u32);
    let scores: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels)).collect();
    let mut labels = vec![0u8; len];
    let mut t = 0;
    while t < len {
        if rng.random_bool(0.08) {
            let run = rng.random_range(1..8).min(len - t);
            labels[t..t + run].fill(1);
            t += run;
        }
        t += 1;
    }
    if labels.iter().all(|&l| l == 0) {
        labels[rng.random_range(0..len)] = 1;
    }
    if labels.iter().all(|&l| l == 1) {
        labels[0] = 0;
    }
    (scores, labels)
}

/// Checks every differentiable op after a random contraction; returns
/// `(name, relative error)` per op.
pub fn op_gradient_errors() -> Vec<(&'static str, f64)> {
    type OpFn = fn(&mut Graph<f64>, &[Var]) -> Result<Var>;
    let cases: Vec<(&'static str, Vec<Vec<usize>>, f64, OpFn)> = vec![
        ("matmul", vec![vec![3, 4], vec![4, 5]], 1.0, |g, v| g.matmul(v[0], v[1])),
        ("matmul_t", vec![vec![3, 4], vec![5, 4]], 1.0, |g, v| g.matmul_t(v[0], v[1])),
        ("add", vec![vec![3, 4], vec![3, 4]], 1.0, |g, v| g.add(v[0], v[1])),
        ("add_row", vec![vec![3, 4], vec![4]], 1.0, |g, v| g.add_row(v[0], v[1])),
        ("scale", vec![vec![2, 3]], 1.0, |g, v| g.scale(v[0], -0.37)),
        ("softmax_rows", vec![vec![4, 6]], 3.0, |g, v| g.softmax_rows(v[0])),
        ("layer_norm", vec![vec![4, 6], vec![6], vec![6]], 1.0, |g, v| g.layer_norm(v[0], v[1], v[2])),
        ("gelu", vec![vec![3, 5]], 3.0, |g, v| g.gelu(v[0])),
        ("sigmoid", vec![vec![3, 5]], 3.0, |g, v| g.sigmoid(v[0])),
        ("reshape", vec![vec![3, 4]], 1.0, |g, v| g.reshape(v[0], &[2, 6])),
        ("block", vec![vec![5, 6]], 1.0, |g, v| g.block(v[0], 1..4, 2..5)),
        ("concat_cols", vec![vec![3, 2], vec![3, 4]], 1.0, |g, v| g.concat_cols(&[v[0], v[1]])),
        ("concat_rows", vec![vec![2, 3], vec![4, 3]], 1.0, |g, v| g.concat_rows(&[v[0], v[1]])),
        ("toeplitz", vec![vec![9]], 1.0, |g, v| g.toeplitz(v[0], 5)),
    ];
    let mut out = Vec::new();
    for (k, (name, shapes, scale, op)) in cases.into_iter().enumerate() {
        let mut r = rng(1000 + k as u64);
        let inputs: Vec<Tensor<f64>> = shapes.iter().map(|s| random_tensor(s, scale, &mut r)).collect();
        let mut probe = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|x| probe.variable(x.clone()).unwrap()).collect();
        let probe_out = op(&mut probe, &vars).unwrap();
        let shape = probe.value(probe_out).shape().to_vec();
        let weights = random_tensor(&shape, 1.0, &mut r);
        let e = check_gradients(&inputs, 1e-5, |g, v| {
            let o = op(g, v)?;
            contract(g, o, &weights)
        });
        out.push((name, e));
    }
    let mut r = rng(2000);
    let scores = Tensor::new(&[12], (0..12).map(|_| r.random_range(0.05..0.95)).collect()).unwrap();
    let labels: Vec<f64> = (0..12).map(|i| f64::from(i % 3 == 0)).collect();
    out.push(("bce", check_gradients(&[scores], 1e-5, |g, v| g.bce(v[0], &labels))));
    out
}

pub fn check_confusion_oracle(instances: usize, seed: u64) -> std::result::Result<(), String> {
    use tsad_core::evaluation::{confusion, f1};
    let mut r = rng(seed);
    for i in 0..instances {
        let len = r.random_range(1..1000);
        let labels: Vec<u8> = (0..len).map(|_| u8::from(r.random_bool(0.2))).collect();
        let preds: Vec<u8> = (0..len).map(|_| u8::from(r.random_bool(0.3))).collect();
        let c = confusion(&labels, &preds).map_err(|e| e.to_string())?;
        if c != naive_confusion(&labels, &preds) || f1(c.0, c.1, c.2) != naive_f1(c) {
            return Err(format!("instance {i}: confusion/f1 disagree with loop oracle"));
        }
    }
    Ok(())
}

/// Largest deviation from the pairwise oracle.
pub fn check_auroc_oracle(instances: usize, seed: u64) -> std::result::Result<f64, String> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let len = r.random_range(2..300);
        let (scores, labels) = random_instance(len, &mut r);
        let a = tsad_core::evaluation::auroc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((a - pairwise_auroc(&scores, &labels)).abs());
    }
    Ok(worst)
}

pub fn check_point_adjust_oracle(instances: usize, seed: u64) -> std::result::Result<(), String> {
    use tsad_core::evaluation::point_adjust;
    let mut r = rng(seed);
    for i in 0..instances {
        let len = r.random_range(2..300);
        let (_, labels) = random_instance(len, &mut r);
        let preds: Vec<u8> = (0..labels.len()).map(|_| u8::from(r.random_bool(0.1))).collect();
        let adj = point_adjust(&labels, &preds).map_err(|e| e.to_string())?;
        if adj != hand_point_adjust(&labels, &preds) {
            return Err(format!("instance {i}: point adjustment differs from hand rule"));
        }
        if point_adjust(&labels, &adj).map_err(|e| e.to_string())? != adj {
            return Err(format!("instance {i}: point adjustment not idempotent"));
        }
    }
    Ok(())
}

pub fn check_best_f1_dominance(instances: usize, seed: u64) -> std::result::Result<(), String> {
    use tsad_core::evaluation::best_f1_search;
    let mut r = rng(seed);
    for i in 0..instances {
        let len = r.random_range(2..200);
        let (scores, labels) = random_instance(len, &mut r);
        for adjust in [false, true] {
            let (theta, best) = best_f1_search(&scores, &labels, adjust).map_err(|e| e.to_string())?;
            if best != naive_f1_at(&scores, &labels, theta, adjust) {
                return Err(format!("instance {i}: reported F1 not achieved at its threshold"));
            }
            let mut distinct = scores.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            for &th in &distinct {
                let v = naive_f1_at(&scores, &labels, th, adjust);
                if v > best || (v == best && th > theta) {
                    return Err(format!("instance {i}: threshold {th} beats the search (adjust={adjust})"));
                }
            }
        }
    }
    Ok(())
}

pub fn training(dim: usize, len: usize, seed: u64) -> TimeSeries {
    let mut r = rng(seed);
    let values = (0..len * dim)
        .map(|i| (i as f64 * 0.05).sin() + r.random_range(-0.1..0.1))
        .collect();
    TimeSeries::new("train", (0..dim).map(|c| format!("c{c}")).collect(), values).unwrap()
}

/// Every structural invariant of a degraded window against its source.
pub fn check_invariants(src: &[f64], out: &DegradedWindow, cfg: &DegradationConfig) -> Result<(), String> {
    let dim = out.dim;
    let n = src.len() / dim;
    if out.values.len() != src.len() || out.labels.len() != n {
        return Err("shape changed".into());
    }
    let Some(iv) = out.interval else {
        if out.labels.iter().any(|&l| l != 0) || out.values != src || out.kind.is_some() {
            return Err("undegraded window altered".into());
        }
        return Ok(());
    };
    if iv.end >= n || iv.start > iv.end {
        return Err(format!("interval {iv:?} outside window"));
    }
    let cap = (cfg.max_len_frac * n as f64).floor() as usize;
    if iv.len() > cap {
        return Err(format!("interval length {} above cap {cap}", iv.len()));
    }
    for t in 0..n {
        if (out.labels[t] == 1) != (iv.start <= t && t <= iv.end) {
            return Err(format!("label {t} disagrees with interval {iv:?}"));
        }
    }
    if out.columns.is_empty() {
        return Err("no columns degraded".into());
    }
    for t in 0..n {
        for c in 0..dim {
            let k = t * dim + c;
            let inside = iv.start <= t && t <= iv.end && out.columns.contains(&c);
            if !inside && out.values[k].to_bits() != src[k].to_bits() {
                return Err(format!("value at ({t}, {c}) changed outside the interval"));
            }
        }
    }
    match out.kind {
        Some(OutlierKind::Peak) if iv.len() != 1 => return Err("peak labels more than one point".into()),
        Some(OutlierKind::Uniform) => {
            for &c in &out.columns {
                let first = out.values[iv.start * dim + c];
                if (iv.start..=iv.end).any(|t| out.values[t * dim + c] != first) {
                    return Err("uniform interval not flat".into());
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Runs `calls` default-config degrade calls, checking every invariant;
/// returns the observed frequencies of (soft, uniform, peak, length, none).
pub fn degradation_sweep(calls: usize, seed: u64) -> std::result::Result<[f64; 5], String> {
    let cfg = DegradationConfig::default();
    let train = training(4, 2000, seed);
    let mut r = rng(seed + 1);
    let mut counts = [0usize; 5];
    for _ in 0..calls {
        let start = r.random_range(0..=train.len() - 100);
        let src = train.rows(start, 100);
        let out = degrade(src, &train, &cfg, &mut r).map_err(|e| e.to_string())?;
        check_invariants(src, &out, &cfg)?;
        let slot = match out.kind {
            Some(k) => OutlierKind::ALL.iter().position(|&x| x == k).unwrap(),
            None => 4,
        };
        counts[slot] += 1;
    }
    Ok(counts.map(|c| c as f64 / calls as f64))
}

/// Same seed gives the same degraded window, for `draws` seeds.
pub fn degradation_deterministic(draws: u64) -> bool {
    let cfg = DegradationConfig::default();
    let train = training(3, 500, 3);
    let src = train.rows(40, 100);
    (0..draws).all(|seed| {
        degrade(src, &train, &cfg, &mut rng(seed)).ok() == degrade(src, &train, &cfg, &mut rng(seed)).ok()
    })
}
