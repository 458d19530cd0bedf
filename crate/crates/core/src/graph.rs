//! Reverse-mode differentiation over a recorded computation graph.
//!
//! Every operation appends a node holding its forward value. Nodes are only
//! ever appended after their inputs, so insertion order is a topological
//! order and [`Graph::backward`] simply walks the node list in reverse.
//! Gradients of a node used by several consumers are summed.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gemm, gemm_into, Tensor, Trans};

/// Variance epsilon used by [`Graph::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Scores are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, tb: Trans },
    Add(Var, Var),
    AddRow { x: Var, bias: Var },
    Scale { x: Var, c: T },
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    /// Keeps Φ(x) so the backward pass needs no second erf.
    Gelu { x: Var, cdf: Vec<T> },
    Sigmoid(Var),
    Bce { scores: Var, labels: Vec<T> },
    Reshape(Var),
    Block { x: Var, row0: usize, col0: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Toeplitz { table: Var, m: usize },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn std_normal_pdf<T: Scalar>(x: T) -> T {
    T::of(1.0 / (2.0 * PI).sqrt()) * (-(x * x) / T::of(2.0)).exp()
}

fn std_normal_cdf<T: Scalar>(x: T) -> T {
    T::of(0.5) * (T::one() + (x / T::of(std::f64::consts::SQRT_2)).erf())
}

pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    x * std_normal_cdf(x)
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, t: Tensor<T>, needs_grad: bool) -> Result<Var> {
        if !t.all_finite() {
            return Err(Error::NonFinite { op: "leaf" });
        }
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Result<Var> {
        self.leaf(t, false)
    }

    /// Leaf whose gradient is reported by [`Graph::backward`].
    pub fn variable(&mut self, t: Tensor<T>) -> Result<Var> {
        self.leaf(t, true)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    /// `a · b` for `a: m×k`, `b: k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(Error::shape("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let out = gemm(self.value(a), Trans::No, self.value(b), Trans::No);
        self.push("matmul", out, Op::MatMul { a, b, tb: Trans::No }, &[a, b])
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (n, k2)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(Error::shape("matmul_t", format!("{m}x{k} · ({n}x{k2})ᵀ")));
        }
        let out = gemm(self.value(a), Trans::No, self.value(b), Trans::Yes);
        self.push("matmul_t", out, Op::MatMul { a, b, tb: Trans::Yes }, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Adds `bias: n` to every row of `x: m×n`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.dims(x);
        if self.value(bias).len() != n {
            return Err(Error::shape(
                "add_row",
                format!("{} columns, bias of {}", n, self.value(bias).len()),
            ));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for row in out.data_mut().chunks_mut(n) {
            for (o, &bb) in row.iter_mut().zip(b) {
                *o += bb;
            }
        }
        self.push("add_row", out, Op::AddRow { x, bias }, &[x, bias])
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let out = self.value(x).map(|v| v * c);
        self.push("scale", out, Op::Scale { x, c }, &[x])
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (_, n) = self.dims(x);
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(n.max(1)) {
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push("softmax_rows", out, Op::Softmax(x), &[x])
    }

    /// Per-row standardization followed by the affine map `gamma·x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if n == 0 || self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(Error::shape("layer_norm", format!("row width {n}")));
        }
        let eps = T::of(LAYER_NORM_EPS);
        let nf = T::of(n as f64);
        let src = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![T::zero(); m * n];
        let mut rstd = vec![T::zero(); m];
        let mut out = vec![T::zero(); m * n];
        for r in 0..m {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for c in 0..n {
                let h = (row[c] - mean) * rs;
                xhat[r * n + c] = h;
                out[r * n + c] = g[c] * h + b[c];
            }
        }
        let out = Tensor::new(&[m, n], out)?;
        self.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            &[x, gamma, beta],
        )
    }

    /// Exact GELU, `x·Φ(x)`.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let cdf: Vec<T> = xv.data().iter().map(|&v| std_normal_cdf(v)).collect();
        let out = Tensor::new(xv.shape(), xv.data().iter().zip(&cdf).map(|(&v, &c)| v * c).collect())?;
        self.push("gelu", out, Op::Gelu { x, cdf }, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid_scalar);
        self.push("sigmoid", out, Op::Sigmoid(x), &[x])
    }

    /// Mean binary cross entropy between `scores` and constant `labels`.
    ///
    /// Scores are clamped away from 0 and 1 in the forward pass; the clamp
    /// is treated as the identity by the backward pass so saturated wrong
    /// predictions still receive gradient.
    pub fn bce(&mut self, scores: Var, labels: &[T]) -> Result<Var> {
        let a = self.value(scores);
        if a.len() != labels.len() || labels.is_empty() {
            return Err(Error::shape(
                "bce",
                format!("{} scores, {} labels", a.len(), labels.len()),
            ));
        }
        let lo = T::of(BCE_CLAMP);
        let hi = T::one() - lo;
        let n = T::of(labels.len() as f64);
        let total: T = a
            .data()
            .iter()
            .zip(labels)
            .map(|(&s, &y)| {
                let s = s.max(lo).min(hi);
                y * s.ln() + (T::one() - y) * (T::one() - s).ln()
            })
            .sum();
        let out = Tensor::scalar(-total / n);
        self.push(
            "bce",
            out,
            Op::Bce {
                scores,
                labels: labels.to_vec(),
            },
            &[scores],
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape)?;
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    /// Copies the sub-matrix `x[rows, cols]`.
    pub fn block(&mut self, x: Var, rows: Range<usize>, cols: Range<usize>) -> Result<Var> {
        let (m, n) = self.dims(x);
        if rows.end > m || cols.end > n || rows.start > rows.end || cols.start > cols.end {
            return Err(Error::shape(
                "block",
                format!("{rows:?}×{cols:?} out of {m}x{n}"),
            ));
        }
        let src = self.value(x).data();
        let w = cols.len();
        let mut data = Vec::with_capacity(rows.len() * w);
        for r in rows.clone() {
            data.extend_from_slice(&src[r * n + cols.start..r * n + cols.end]);
        }
        let out = Tensor::new(&[rows.len(), w], data)?;
        self.push(
            "block",
            out,
            Op::Block {
                x,
                row0: rows.start,
                col0: cols.start,
            },
            &[x],
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = parts.first().map_or(0, |&p| self.dims(p).0);
        if parts.iter().any(|&p| self.dims(p).0 != m) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let n: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                let w = self.dims(p).1;
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let out = Tensor::new(&[m, n], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = parts.first().map_or(0, |&p| self.dims(p).1);
        if parts.iter().any(|&p| self.dims(p).1 != n) {
            return Err(Error::shape("concat_rows", "column counts differ"));
        }
        let m: usize = parts.iter().map(|&p| self.dims(p).0).sum();
        let mut data = Vec::with_capacity(m * n);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(&[m, n], data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Expands a relative-offset table of length `2m−1` into the `m×m`
    /// matrix `B[i][j] = table[(j − i) + m − 1]`.
    pub fn toeplitz(&mut self, table: Var, m: usize) -> Result<Var> {
        let t = self.value(table);
        if m == 0 || t.len() != 2 * m - 1 {
            return Err(Error::shape(
                "toeplitz",
                format!("table of {} for m = {m}", t.len()),
            ));
        }
        let out = Tensor::new(&[m, m], toeplitz_values(t.data(), m))?;
        self.push("toeplitz", out, Op::Toeplitz { table, m }, &[table])
    }

    /// Propagates `d root / d node` to every node that depends on a
    /// [`Graph::variable`]. A non-scalar root is seeded with ones.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        let root_shape = self.nodes[root.0].value.shape().to_vec();
        grads[root.0] = Some(Tensor::full(&root_shape, T::one()));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, g, &mut grads);
        }
        Gradients { grads }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn backward_node(&self, node: &Node<T>, g: Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, tb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    // C = A·B  → dA = G·Bᵀ ;  C = A·Bᵀ → dA = G·B
                    let t = if *tb == Trans::No { Trans::Yes } else { Trans::No };
                    acc_gemm(grads, *a, &g, Trans::No, bv, t);
                }
                if self.wants(*b) {
                    match tb {
                        Trans::No => acc_gemm(grads, *b, av, Trans::Yes, &g, Trans::No),
                        Trans::Yes => acc_gemm(grads, *b, &g, Trans::Yes, av, Trans::No),
                    }
                }
            }
            Op::Add(a, b) => {
                if self.wants(*b) {
                    acc(grads, *b, g.clone());
                }
                if self.wants(*a) {
                    acc(grads, *a, g);
                }
            }
            Op::AddRow { x, bias } => {
                if self.wants(*bias) {
                    let n = self.value(*bias).len();
                    let mut db = vec![T::zero(); n];
                    for row in g.data().chunks(n) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    acc(grads, *bias, Tensor::new(&shape, db).expect("bias shape"));
                }
                if self.wants(*x) {
                    acc(grads, *x, g);
                }
            }
            Op::Scale { x, c } => {
                let mut g = g;
                g.scale_in_place(*c);
                acc(grads, *x, g);
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let (_, n) = y.dims2();
                let mut dx = g;
                for (drow, yrow) in dx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                    let dot: T = drow.iter().zip(yrow).map(|(&d, &yy)| d * yy).sum();
                    for (d, &yy) in drow.iter_mut().zip(yrow) {
                        *d = yy * (*d - dot);
                    }
                }
                acc(grads, *x, dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let (m, n) = node.value.dims2();
                let gam = self.value(*gamma).data();
                if self.wants(*gamma) || self.wants(*beta) {
                    let mut dg = vec![T::zero(); n];
                    let mut db = vec![T::zero(); n];
                    for r in 0..m {
                        for c in 0..n {
                            let gv = g.data()[r * n + c];
                            dg[c] += gv * xhat[r * n + c];
                            db[c] += gv;
                        }
                    }
                    if self.wants(*gamma) {
                        acc(grads, *gamma, Tensor::new(&[n], dg).expect("gamma"));
                    }
                    if self.wants(*beta) {
                        acc(grads, *beta, Tensor::new(&[n], db).expect("beta"));
                    }
                }
                if self.wants(*x) {
                    let nf = T::of(n as f64);
                    let mut dx = vec![T::zero(); m * n];
                    let mut dxhat = vec![T::zero(); n];
                    for r in 0..m {
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for c in 0..n {
                            let d = g.data()[r * n + c] * gam[c];
                            dxhat[c] = d;
                            s1 += d;
                            s2 += d * xhat[r * n + c];
                        }
                        for c in 0..n {
                            dx[r * n + c] =
                                rstd[r] / nf * (nf * dxhat[c] - s1 - xhat[r * n + c] * s2);
                        }
                    }
                    let shape = self.value(*x).shape().to_vec();
                    acc(grads, *x, Tensor::new(&shape, dx).expect("ln dx"));
                }
            }
            Op::Gelu { x, cdf } => {
                let xv = self.value(*x);
                let mut dx = g;
                for ((d, &v), &c) in dx.data_mut().iter_mut().zip(xv.data()).zip(cdf) {
                    *d *= c + v * std_normal_pdf(v);
                }
                acc(grads, *x, dx);
            }
            Op::Sigmoid(x) => {
                let mut dx = g;
                for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= y * (T::one() - y);
                }
                acc(grads, *x, dx);
            }
            Op::Bce { scores, labels } => {
                let a = self.value(*scores);
                let lo = T::of(BCE_CLAMP);
                let hi = T::one() - lo;
                let scale = g.data()[0] / T::of(labels.len() as f64);
                let data = a
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| {
                        let s = s.max(lo).min(hi);
                        scale * (s - y) / (s * (T::one() - s))
                    })
                    .collect();
                let shape = a.shape().to_vec();
                acc(grads, *scores, Tensor::new(&shape, data).expect("bce"));
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                acc(grads, *x, g.reshaped(&shape).expect("reshape"));
            }
            Op::Block { x, row0, col0 } => {
                let (_, n) = self.dims(*x);
                let (bm, bn) = g.dims2();
                let slot = grads[x.0].get_or_insert_with(|| Tensor::zeros(self.value(*x).shape()));
                let dst = slot.data_mut();
                for r in 0..bm {
                    let off = (row0 + r) * n + col0;
                    for (d, &v) in dst[off..off + bn].iter_mut().zip(&g.data()[r * bn..(r + 1) * bn]) {
                        *d += v;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let (m, n) = g.dims2();
                let mut col = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    if self.wants(p) {
                        let mut data = Vec::with_capacity(m * w);
                        for r in 0..m {
                            data.extend_from_slice(&g.data()[r * n + col..r * n + col + w]);
                        }
                        let shape = self.value(p).shape().to_vec();
                        acc(grads, p, Tensor::new(&shape, data).expect("concat_cols"));
                    }
                    col += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.wants(p) {
                        let shape = self.value(p).shape().to_vec();
                        let part = g.data()[off..off + len].to_vec();
                        acc(grads, p, Tensor::new(&shape, part).expect("concat_rows"));
                    }
                    off += len;
                }
            }
            Op::Toeplitz { table, m } => {
                let m = *m;
                let mut dt = vec![T::zero(); 2 * m - 1];
                for i in 0..m {
                    for j in 0..m {
                        dt[j + m - 1 - i] += g.data()[i * m + j];
                    }
                }
                let shape = self.value(*table).shape().to_vec();
                acc(grads, *table, Tensor::new(&shape, dt).expect("toeplitz"));
            }
        }
    }
}

pub(crate) fn toeplitz_values<T: Scalar>(table: &[T], m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            out.push(table[j + m - 1 - i]);
        }
    }
    out
}

fn acc<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn acc_gemm<T: Scalar>(
    grads: &mut [Option<Tensor<T>>],
    v: Var,
    a: &Tensor<T>,
    ta: Trans,
    b: &Tensor<T>,
    tb: Trans,
) {
    match &mut grads[v.0] {
        Some(existing) => gemm_into(a, ta, b, tb, T::one(), existing),
        slot @ None => *slot = Some(gemm(a, ta, b, tb)),
    }
}
