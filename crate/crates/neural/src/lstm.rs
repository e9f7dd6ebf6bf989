//! Single-layer LSTMs with explicit backpropagation through time.
//!
//! Gate layout inside the stacked `4H` pre-activation is `[input, forget, cell, output]`.

use rand::Rng;

use crate::tensor::join_name;
use crate::{sigmoid, Float, NeuralError, Param, ParamSet, Result, Tensor2};

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<F> {
    pub w_input: Param<F>,
    pub w_hidden: Param<F>,
    pub bias: Param<F>,
    input_dim: usize,
    hidden_dim: usize,
}

/// Activations kept from a forward pass.
#[derive(Clone, Debug)]
pub struct LstmCache<F> {
    inputs: Tensor2<F>,
    gates: Tensor2<F>,
    cells: Tensor2<F>,
    cell_tanh: Tensor2<F>,
    pub hidden: Tensor2<F>,
}

impl<F: Float> Lstm<F> {
    /// Forget-gate bias starts at +1; everything else is fan-in uniform.
    pub fn new<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let g = 4 * hidden_dim;
        let mut bias = Param::init_uniform(1, g, hidden_dim, rng);
        for b in &mut bias.value.row_mut(0)[hidden_dim..2 * hidden_dim] {
            *b = F::one();
        }
        Self {
            w_input: Param::init_uniform(g, input_dim, input_dim, rng),
            w_hidden: Param::init_uniform(g, hidden_dim, hidden_dim, rng),
            bias,
            input_dim,
            hidden_dim,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self {
            w_input: Param::zeros(g, input_dim),
            w_hidden: Param::zeros(g, hidden_dim),
            bias: Param::zeros(1, g),
            input_dim,
            hidden_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// One recurrence step from `(h, c)`; returns the new `(h, c)`.
    pub fn step(&self, x: &[F], h: &[F], c: &[F]) -> (Vec<F>, Vec<F>) {
        let hd = self.hidden_dim;
        let mut z = self.bias.value.row(0).to_vec();
        self.w_input.value.matvec_acc(x, &mut z);
        self.w_hidden.value.matvec_acc(h, &mut z);
        let mut h_new = vec![F::zero(); hd];
        let mut c_new = vec![F::zero(); hd];
        for k in 0..hd {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hd + k]);
            let g = z[2 * hd + k].tanh();
            let o = sigmoid(z[3 * hd + k]);
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        (h_new, c_new)
    }

    /// Runs left-to-right from zero states.
    pub fn forward(&self, inputs: &Tensor2<F>) -> Result<LstmCache<F>> {
        if inputs.cols() != self.input_dim {
            return Err(NeuralError::WidthMismatch {
                expected: self.input_dim,
                got: inputs.cols(),
            });
        }
        let t_len = inputs.rows();
        let hd = self.hidden_dim;
        let mut gates = Tensor2::zeros(t_len, 4 * hd);
        let mut cells = Tensor2::zeros(t_len, hd);
        let mut cell_tanh = Tensor2::zeros(t_len, hd);
        let mut hidden = Tensor2::zeros(t_len, hd);
        let mut h_prev = vec![F::zero(); hd];
        let mut c_prev = vec![F::zero(); hd];
        for t in 0..t_len {
            let z = gates.row_mut(t);
            z.copy_from_slice(self.bias.value.row(0));
            self.w_input.value.matvec_acc(inputs.row(t), z);
            self.w_hidden.value.matvec_acc(&h_prev, z);
            for k in 0..hd {
                z[k] = sigmoid(z[k]);
                z[hd + k] = sigmoid(z[hd + k]);
                z[2 * hd + k] = z[2 * hd + k].tanh();
                z[3 * hd + k] = sigmoid(z[3 * hd + k]);
            }
            for k in 0..hd {
                let (i, f, g, o) = (z[k], z[hd + k], z[2 * hd + k], z[3 * hd + k]);
                let c = f * c_prev[k] + i * g;
                let tc = c.tanh();
                cells.set(t, k, c);
                cell_tanh.set(t, k, tc);
                hidden.set(t, k, o * tc);
            }
            h_prev.copy_from_slice(hidden.row(t));
            c_prev.copy_from_slice(cells.row(t));
        }
        Ok(LstmCache {
            inputs: inputs.clone(),
            gates,
            cells,
            cell_tanh,
            hidden,
        })
    }

    /// Backpropagates `d_hidden` (T×H), accumulating parameter gradients.
    /// Returns the gradient with respect to the inputs.
    pub fn backward(&mut self, cache: &LstmCache<F>, d_hidden: &Tensor2<F>) -> Tensor2<F> {
        let t_len = cache.inputs.rows();
        let hd = self.hidden_dim;
        let mut dx = Tensor2::zeros(t_len, self.input_dim);
        let mut dh_next = vec![F::zero(); hd];
        let mut dc_next = vec![F::zero(); hd];
        let mut dz = vec![F::zero(); 4 * hd];
        let zeros = vec![F::zero(); hd];
        for t in (0..t_len).rev() {
            let z = cache.gates.row(t);
            let c_prev = if t > 0 { cache.cells.row(t - 1) } else { &zeros[..] };
            let h_prev = if t > 0 { cache.hidden.row(t - 1) } else { &zeros[..] };
            for k in 0..hd {
                let (i, f, g, o) = (z[k], z[hd + k], z[2 * hd + k], z[3 * hd + k]);
                let tc = cache.cell_tanh.get(t, k);
                let dh = d_hidden.get(t, k) + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (F::one() - tc * tc) + dc_next[k];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev[k];
                dc_next[k] = dc * f;
                dz[k] = d_i * i * (F::one() - i);
                dz[hd + k] = d_f * f * (F::one() - f);
                dz[2 * hd + k] = d_g * (F::one() - g * g);
                dz[3 * hd + k] = d_o * o * (F::one() - o);
            }
            self.w_input.grad.add_outer(&dz, cache.inputs.row(t));
            self.w_hidden.grad.add_outer(&dz, h_prev);
            for (b, d) in self.bias.grad.row_mut(0).iter_mut().zip(&dz) {
                *b += *d;
            }
            self.w_input.value.matvec_t_acc(&dz, dx.row_mut(t));
            dh_next.iter_mut().for_each(|v| *v = F::zero());
            self.w_hidden.value.matvec_t_acc(&dz, &mut dh_next);
        }
        dx
    }
}

impl<F: Float> ParamSet<F> for Lstm<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        out.push((join_name(prefix, "w_input"), &self.w_input));
        out.push((join_name(prefix, "w_hidden"), &self.w_hidden));
        out.push((join_name(prefix, "bias"), &self.bias));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        out.push((join_name(prefix, "w_input"), &mut self.w_input));
        out.push((join_name(prefix, "w_hidden"), &mut self.w_hidden));
        out.push((join_name(prefix, "bias"), &mut self.bias));
    }
}

fn reverse_rows<F: Float>(x: &Tensor2<F>) -> Tensor2<F> {
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    for t in 0..x.rows() {
        out.row_mut(x.rows() - 1 - t).copy_from_slice(x.row(t));
    }
    out
}

/// Forward and backward LSTMs whose per-timestep outputs are concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm<F> {
    pub forward: Lstm<F>,
    pub backward: Lstm<F>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache<F> {
    fwd: LstmCache<F>,
    bwd: LstmCache<F>,
    pub output: Tensor2<F>,
}

impl<F: Float> BiLstm<F> {
    pub fn new<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let forward = Lstm::new(input_dim, hidden_dim, rng);
        let backward = Lstm::new(input_dim, hidden_dim, rng);
        Self { forward, backward }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            forward: Lstm::zeros(input_dim, hidden_dim),
            backward: Lstm::zeros(input_dim, hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    /// T×I in, T×2H out. `T = 0` yields an empty `0×2H` matrix.
    pub fn forward(&self, inputs: &Tensor2<F>) -> Result<BiLstmCache<F>> {
        let fwd = self.forward.forward(inputs)?;
        let bwd = self.backward.forward(&reverse_rows(inputs))?;
        let output = fwd.hidden.hcat(&reverse_rows(&bwd.hidden));
        Ok(BiLstmCache { fwd, bwd, output })
    }

    pub fn backward(&mut self, cache: &BiLstmCache<F>, d_out: &Tensor2<F>) -> Tensor2<F> {
        let (d_fwd, d_bwd) = d_out.hsplit(self.hidden_dim());
        let mut dx = self.forward.backward(&cache.fwd, &d_fwd);
        let dx_rev = self.backward.backward(&cache.bwd, &reverse_rows(&d_bwd));
        let dx_b = reverse_rows(&dx_rev);
        for (a, b) in dx.data_mut().iter_mut().zip(dx_b.data()) {
            *a += *b;
        }
        dx
    }
}

impl<F: Float> ParamSet<F> for BiLstm<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        self.forward.params(&join_name(prefix, "fwd"), out);
        self.backward.params(&join_name(prefix, "bwd"), out);
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        self.forward.params_mut(&join_name(prefix, "fwd"), out);
        self.backward.params_mut(&join_name(prefix, "bwd"), out);
    }
}
