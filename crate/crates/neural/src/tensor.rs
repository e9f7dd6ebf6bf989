use rand::Rng;

use crate::Float;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Tensor2<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<F>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Uniform samples in `[-bound, bound]`.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| F::of(rng.gen_range(-bound..=bound)))
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `out += self · x` for a column vector `x`.
    pub fn matvec_acc(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut s = F::zero();
            for (a, b) in row.iter().zip(x) {
                s += *a * *b;
            }
            *o += s;
        }
    }

    /// `out += selfᵀ · y`.
    pub fn matvec_t_acc(&self, y: &[F], out: &mut [F]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == F::zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += *a * yr;
            }
        }
    }

    /// `self += a ⊗ b` (outer product).
    pub fn add_outer(&mut self, a: &[F], b: &[F]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == F::zero() {
                continue;
            }
            for (x, bc) in self.row_mut(r).iter_mut().zip(b) {
                *x += ar * *bc;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Converts element type, e.g. `f32` storage into an `f64` model.
    pub fn cast<G: Float>(&self) -> Tensor2<G> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| G::of(x.as_f64())).collect(),
        }
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hcat row mismatch");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Splits columns `[0, at)` and `[at, cols)`.
    pub fn hsplit(&self, at: usize) -> (Self, Self) {
        assert!(at <= self.cols);
        let mut left = Self::zeros(self.rows, at);
        let mut right = Self::zeros(self.rows, self.cols - at);
        for r in 0..self.rows {
            let row = self.row(r);
            left.row_mut(r).copy_from_slice(&row[..at]);
            right.row_mut(r).copy_from_slice(&row[at..]);
        }
        (left, right)
    }
}

/// A trainable matrix together with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<F> {
    pub value: Tensor2<F>,
    pub grad: Tensor2<F>,
}

impl<F: Float> Param<F> {
    pub fn new(value: Tensor2<F>) -> Self {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Tensor2::zeros(rows, cols))
    }

    /// Fan-in scaled uniform initialisation, `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init_uniform<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self::new(Tensor2::uniform(rows, cols, bound, rng))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    /// `value -= lr * grad`.
    pub fn sgd_step(&mut self, lr: F) {
        for (v, g) in self.value.data_mut().iter_mut().zip(self.grad.data()) {
            *v -= lr * *g;
        }
    }
}

/// Anything that owns named trainable parameters.
pub trait ParamSet<F: Float> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>);
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>);

    fn named_params(&self) -> Vec<(String, &Param<F>)> {
        let mut out = Vec::new();
        self.params("", &mut out);
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param<F>)> {
        let mut out = Vec::new();
        self.params_mut("", &mut out);
        out
    }

    fn zero_grad(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    fn sgd_step(&mut self, lr: F) {
        for (_, p) in self.named_params_mut() {
            p.sgd_step(lr);
        }
    }

    fn num_params(&self) -> usize {
        self.named_params()
            .iter()
            .map(|(_, p)| p.value.data().len())
            .sum()
    }
}

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
