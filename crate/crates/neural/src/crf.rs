//! Linear-chain conditional random field over per-timestep emission scores.
//!
//! A label sequence `y` of length `T` scores
//! `start[y0] + Σ emit[t][y_t] + Σ trans[y_{t-1}][y_t] + end[y_{T-1}]`.

use rand::Rng;

use crate::tensor::join_name;
use crate::{log_sum_exp, Float, NeuralError, Param, ParamSet, Result, Tensor2};

#[derive(Clone, Debug, PartialEq)]
pub struct Crf<F> {
    /// `transitions[i][j]`: score of moving from label `i` to label `j`.
    pub transitions: Param<F>,
    pub start: Param<F>,
    pub end: Param<F>,
}

impl<F: Float> Crf<F> {
    pub fn new<R: Rng>(num_labels: usize, rng: &mut R) -> Self {
        Self {
            transitions: Param::init_uniform(num_labels, num_labels, num_labels, rng),
            start: Param::init_uniform(1, num_labels, num_labels, rng),
            end: Param::init_uniform(1, num_labels, num_labels, rng),
        }
    }

    pub fn zeros(num_labels: usize) -> Self {
        Self {
            transitions: Param::zeros(num_labels, num_labels),
            start: Param::zeros(1, num_labels),
            end: Param::zeros(1, num_labels),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.transitions.value.rows()
    }

    fn check(&self, emissions: &Tensor2<F>) -> Result<()> {
        if emissions.rows() == 0 {
            return Err(NeuralError::EmptySequence);
        }
        if emissions.cols() != self.num_labels() {
            return Err(NeuralError::WidthMismatch {
                expected: self.num_labels(),
                got: emissions.cols(),
            });
        }
        Ok(())
    }

    fn check_labels(&self, emissions: &Tensor2<F>, labels: &[usize]) -> Result<()> {
        self.check(emissions)?;
        if labels.len() != emissions.rows() {
            return Err(NeuralError::WidthMismatch {
                expected: emissions.rows(),
                got: labels.len(),
            });
        }
        let k = self.num_labels();
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(NeuralError::LabelOutOfRange {
                label: bad,
                num_labels: k,
            });
        }
        Ok(())
    }

    /// Unnormalised score of one label path.
    pub fn score(&self, emissions: &Tensor2<F>, labels: &[usize]) -> Result<F> {
        self.check_labels(emissions, labels)?;
        let tr = &self.transitions.value;
        let mut s = self.start.value.get(0, labels[0]) + emissions.get(0, labels[0]);
        for t in 1..labels.len() {
            s += tr.get(labels[t - 1], labels[t]) + emissions.get(t, labels[t]);
        }
        s += self.end.value.get(0, labels[labels.len() - 1]);
        Ok(s)
    }

    /// Forward variables `alpha[t][j]` (log-space, excluding the end score).
    fn alphas(&self, emissions: &Tensor2<F>) -> Tensor2<F> {
        let (t_len, k) = (emissions.rows(), self.num_labels());
        let tr = &self.transitions.value;
        let mut alpha = Tensor2::zeros(t_len, k);
        for j in 0..k {
            alpha.set(0, j, self.start.value.get(0, j) + emissions.get(0, j));
        }
        let mut buf = vec![F::zero(); k];
        for t in 1..t_len {
            for j in 0..k {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = alpha.get(t - 1, i) + tr.get(i, j);
                }
                alpha.set(t, j, log_sum_exp(&buf) + emissions.get(t, j));
            }
        }
        alpha
    }

    /// Backward variables `beta[t][i]` (log-space, including the end score).
    fn betas(&self, emissions: &Tensor2<F>) -> Tensor2<F> {
        let (t_len, k) = (emissions.rows(), self.num_labels());
        let tr = &self.transitions.value;
        let mut beta = Tensor2::zeros(t_len, k);
        for i in 0..k {
            beta.set(t_len - 1, i, self.end.value.get(0, i));
        }
        let mut buf = vec![F::zero(); k];
        for t in (0..t_len - 1).rev() {
            for i in 0..k {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = tr.get(i, j) + emissions.get(t + 1, j) + beta.get(t + 1, j);
                }
                beta.set(t, i, log_sum_exp(&buf));
            }
        }
        beta
    }

    /// `log Σ_y exp(score(y))` via the forward algorithm.
    pub fn log_partition(&self, emissions: &Tensor2<F>) -> Result<F> {
        self.check(emissions)?;
        let alpha = self.alphas(emissions);
        let last = emissions.rows() - 1;
        let buf: Vec<F> = (0..self.num_labels())
            .map(|j| alpha.get(last, j) + self.end.value.get(0, j))
            .collect();
        Ok(log_sum_exp(&buf))
    }

    /// Negative log-likelihood of `labels`: `log Z − score(labels)`.
    pub fn nll(&self, emissions: &Tensor2<F>, labels: &[usize]) -> Result<F> {
        let s = self.score(emissions, labels)?;
        Ok(self.log_partition(emissions)? - s)
    }

    /// Per-timestep label marginals `P(y_t = j)`.
    pub fn marginals(&self, emissions: &Tensor2<F>) -> Result<Tensor2<F>> {
        self.check(emissions)?;
        let alpha = self.alphas(emissions);
        let beta = self.betas(emissions);
        let log_z = self.log_partition(emissions)?;
        let mut out = Tensor2::zeros(emissions.rows(), self.num_labels());
        for t in 0..emissions.rows() {
            for j in 0..self.num_labels() {
                out.set(t, j, (alpha.get(t, j) + beta.get(t, j) - log_z).exp());
            }
        }
        Ok(out)
    }

    /// Computes the NLL, accumulates its gradient into the CRF parameters and
    /// returns `(nll, dNLL/d emissions)`.
    pub fn nll_backward(
        &mut self,
        emissions: &Tensor2<F>,
        labels: &[usize],
    ) -> Result<(F, Tensor2<F>)> {
        self.check_labels(emissions, labels)?;
        let (t_len, k) = (emissions.rows(), self.num_labels());
        let alpha = self.alphas(emissions);
        let beta = self.betas(emissions);
        let log_z = {
            let buf: Vec<F> = (0..k)
                .map(|j| alpha.get(t_len - 1, j) + self.end.value.get(0, j))
                .collect();
            log_sum_exp(&buf)
        };
        let nll = log_z - self.score(emissions, labels)?;

        let mut d_emit = Tensor2::zeros(t_len, k);
        for t in 0..t_len {
            for j in 0..k {
                d_emit.set(t, j, (alpha.get(t, j) + beta.get(t, j) - log_z).exp());
            }
            let g = d_emit.get(t, labels[t]);
            d_emit.set(t, labels[t], g - F::one());
        }
        // Row 0 of d_emit is already `p - onehot`, which is exactly the start gradient.
        for j in 0..k {
            let p0 = d_emit.get(0, j);
            let g = self.start.grad.get(0, j);
            self.start.grad.set(0, j, g + p0);
            let p_last = (alpha.get(t_len - 1, j) + self.end.value.get(0, j) - log_z).exp();
            let g = self.end.grad.get(0, j);
            self.end.grad.set(0, j, g + p_last);
        }
        let g = self.end.grad.get(0, labels[t_len - 1]);
        self.end.grad.set(0, labels[t_len - 1], g - F::one());

        let tr = self.transitions.value.clone();
        for t in 1..t_len {
            for i in 0..k {
                for j in 0..k {
                    let p = (alpha.get(t - 1, i) + tr.get(i, j) + emissions.get(t, j)
                        + beta.get(t, j)
                        - log_z)
                        .exp();
                    let g = self.transitions.grad.get(i, j);
                    self.transitions.grad.set(i, j, g + p);
                }
            }
            let (a, b) = (labels[t - 1], labels[t]);
            let g = self.transitions.grad.get(a, b);
            self.transitions.grad.set(a, b, g - F::one());
        }
        Ok((nll, d_emit))
    }

    /// Highest-scoring label path and its score. Ties resolve to the smaller label index.
    pub fn viterbi(&self, emissions: &Tensor2<F>) -> Result<(Vec<usize>, F)> {
        self.viterbi_masked(emissions, |_, _| true)
    }

    /// Viterbi restricted to labels for which `allowed(t, label)` holds. Every
    /// timestep must allow at least one label.
    pub fn viterbi_masked(
        &self,
        emissions: &Tensor2<F>,
        allowed: impl Fn(usize, usize) -> bool,
    ) -> Result<(Vec<usize>, F)> {
        self.check(emissions)?;
        let (t_len, k) = (emissions.rows(), self.num_labels());
        let tr = &self.transitions.value;
        let ninf = F::neg_infinity();
        let emit = |t: usize, j: usize| {
            if allowed(t, j) {
                emissions.get(t, j)
            } else {
                ninf
            }
        };
        let mut delta: Vec<F> = (0..k).map(|j| self.start.value.get(0, j) + emit(0, j)).collect();
        let mut back = vec![vec![0usize; k]; t_len];
        for (t, bp) in back.iter_mut().enumerate().skip(1) {
            let mut next = vec![ninf; k];
            for j in 0..k {
                let e = emit(t, j);
                let mut best = ninf;
                let mut arg = 0;
                for (i, &d) in delta.iter().enumerate() {
                    let s = d + tr.get(i, j);
                    if s > best {
                        best = s;
                        arg = i;
                    }
                }
                next[j] = best + e;
                bp[j] = arg;
            }
            delta = next;
        }
        let mut best = ninf;
        let mut last = 0;
        for (j, &d) in delta.iter().enumerate() {
            let s = d + self.end.value.get(0, j);
            if s > best {
                best = s;
                last = j;
            }
        }
        let mut path = vec![0usize; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = back[t][path[t]];
        }
        Ok((path, best))
    }
}

impl<F: Float> ParamSet<F> for Crf<F> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param<F>)>) {
        out.push((join_name(prefix, "transitions"), &self.transitions));
        out.push((join_name(prefix, "start"), &self.start));
        out.push((join_name(prefix, "end"), &self.end));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param<F>)>) {
        out.push((join_name(prefix, "transitions"), &mut self.transitions));
        out.push((join_name(prefix, "start"), &mut self.start));
        out.push((join_name(prefix, "end"), &mut self.end));
    }
}
