use rand::Rng;

use crate::tensor::join_name;
use crate::{Float, NeuralError, Param, ParamSet, Result, Tensor2};

/// Lookup table mapping categorical indices to dense rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<F> {
    pub table: Param<F>,
}

impl<F: Float> Embedding<F> {
    /// Rows start with unit variance, `U(-√3, √3)`.
    pub fn new<R: Rng>(vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: Param::new(Tensor2::uniform(vocab, dim, 3f64.sqrt(), rng)),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.value.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    /// Indices outside the table are a programming error and panic.
    pub fn forward(&self, indices: &[usize]) -> Tensor2<F> {
        let mut out = Tensor2::zeros(indices.len(), self.dim());
        for (t, &ix) in indices.iter().enumerate() {
            out.row_mut(t).copy_from_slice(self.table.value.row(ix));
        }
        out
    }

    pub fn backward(&mut self, indices: &[usize], d_out: &Tensor2<F>) {
        for (t, &ix) in indices.iter().enumerate() {
            let g = self.table.grad.row_mut(ix);
            for (a, b) in g.iter_mut().zip(d_out.row(t)) {
                *a += *b;
            }
        }
    }
}

impl<F: Float> ParamSet<F> for Embedding<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        out.push((join_name(prefix, "table"), &self.table));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        out.push((join_name(prefix, "table"), &mut self.table));
    }
}

/// Affine projection `y = W x + b`, applied row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
}

impl<F: Float> Linear<F> {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::init_uniform(output, input, input, rng),
            bias: Param::init_uniform(1, output, input, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &Tensor2<F>) -> Result<Tensor2<F>> {
        if x.cols() != self.input_dim() {
            return Err(NeuralError::WidthMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut out = Tensor2::zeros(x.rows(), self.output_dim());
        for t in 0..x.rows() {
            let row = out.row_mut(t);
            row.copy_from_slice(self.bias.value.row(0));
            self.weight.value.matvec_acc(x.row(t), row);
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor2<F>, d_out: &Tensor2<F>) -> Tensor2<F> {
        let mut dx = Tensor2::zeros(x.rows(), x.cols());
        for t in 0..x.rows() {
            let dy = d_out.row(t);
            self.weight.grad.add_outer(dy, x.row(t));
            for (b, g) in self.bias.grad.row_mut(0).iter_mut().zip(dy) {
                *b += *g;
            }
            self.weight.value.matvec_t_acc(dy, dx.row_mut(t));
        }
        dx
    }
}

impl<F: Float> ParamSet<F> for Linear<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        out.push((join_name(prefix, "weight"), &self.weight));
        out.push((join_name(prefix, "bias"), &self.bias));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        out.push((join_name(prefix, "weight"), &mut self.weight));
        out.push((join_name(prefix, "bias"), &mut self.bias));
    }
}
