//! Dense row-major tensors.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2, ShapeBuilder};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", "ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(&[rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` of a 2-D tensor. A 1-D tensor is read as one row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => {
                let last = *other.last().unwrap_or(&1);
                (self.data.len() / last.max(1), last)
            }
        }
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let (_, cols) = self.dims2();
        self.data[row * cols + col]
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_in_place(&mut self, c: T) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Which operand of a product is read transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Trans {
    No,
    Yes,
}

fn view<T: Scalar>(t: &Tensor<T>, trans: Trans) -> ArrayView2<'_, T> {
    let (r, c) = t.dims2();
    let v = ArrayView2::from_shape((r, c).strides((c, 1)), &t.data).expect("contiguous view");
    match trans {
        Trans::No => v,
        Trans::Yes => v.reversed_axes(),
    }
}

/// `c = beta·c + op(a)·op(b)` through the blocked GEMM kernel.
pub(crate) fn gemm_into<T: Scalar>(
    a: &Tensor<T>,
    ta: Trans,
    b: &Tensor<T>,
    tb: Trans,
    beta: T,
    c: &mut Tensor<T>,
) {
    let av = view(a, ta);
    let bv = view(b, tb);
    let (m, n) = (av.nrows(), bv.ncols());
    debug_assert_eq!(av.ncols(), bv.nrows());
    debug_assert_eq!(c.data.len(), m * n);
    let mut cv = ArrayViewMut2::from_shape((m, n).strides((n, 1)), &mut c.data).expect("contiguous");
    general_mat_mul(T::one(), &av, &bv, beta, &mut cv);
}

pub(crate) fn gemm<T: Scalar>(a: &Tensor<T>, ta: Trans, b: &Tensor<T>, tb: Trans) -> Tensor<T> {
    let m = if ta == Trans::No { a.dims2().0 } else { a.dims2().1 };
    let n = if tb == Trans::No { b.dims2().1 } else { b.dims2().0 };
    let mut c = Tensor::zeros(&[m, n]);
    gemm_into(a, ta, b, tb, T::zero(), &mut c);
    c
}
