//! Dense neural building blocks for small sequence taggers.
//!
//! Everything here is hand-differentiated: each layer keeps the activations
//! it needs from the forward pass in a cache value and exposes a `backward`
//! that accumulates into the gradients stored next to its parameters. Layers
//! are generic over the scalar type so that training can run at `f32` while
//! gradient checks run at `f64`.

pub mod binio;
pub mod crf;
mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod tensor;
pub mod train;

pub use crate::crf::Crf;
pub use crate::error::{NeuralError, Result};
pub use crate::layers::{Embedding, Linear};
pub use crate::lstm::{BiLstm, Lstm};
pub use crate::tensor::{Param, ParamSet, Tensor2};
pub use crate::train::{train, EpochRecord, Plateau, Trainable, TrainOutcome, TrainSchedule};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Scalar type usable by every layer.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    #[inline]
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).unwrap()
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }
}

impl Float for f32 {}
impl Float for f64 {}

#[inline]
pub(crate) fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Numerically stable log-sum-exp. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<F: Float>(values: &[F]) -> F {
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let s: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}
