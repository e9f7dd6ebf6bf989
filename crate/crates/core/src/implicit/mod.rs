//! Implicit (dense, pre-computed) features aligned to morphemes.

mod charlm;
mod file;

pub use charlm::{charlm_embed, train_charlm, CharLm, CharLmConfig, CharLmTraining};
pub use file::{EmbeddingFile, EMBEDDING_MAGIC, EMBEDDING_VERSION};

use std::ops::Range;

use jfront_neural::{Float, NeuralError, Tensor2};
use thiserror::Error;

use crate::text::Sentence;

#[derive(Debug, Error)]
pub enum ImplicitError {
    #[error("not an embedding file (bad magic)")]
    BadMagic,

    #[error("embedding file version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("record {id:?} does not hold a whole number of {dim}-dimensional rows")]
    DimMismatch { id: String, dim: usize },

    #[error("no embeddings stored for sentence {0:?}")]
    UnknownSentenceId(String),

    #[error("sentence id {0:?} is stored twice")]
    DuplicateId(String),

    #[error("embedding file truncated while reading {0}")]
    Truncated(String),

    #[error("invalid embedding file header: {0}")]
    InvalidHeader(String),

    #[error("alignment range {index} is empty")]
    EmptyRange { index: usize },

    #[error("alignment range {index} ({start}..{end}) exceeds {rows} subword rows")]
    RangeOutOfBounds {
        index: usize,
        start: usize,
        end: usize,
        rows: usize,
    },

    #[error("sentence {id:?} has {expected} morphemes but {found} embedding rows")]
    RowCountMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("character LM training corpus is empty")]
    EmptyCorpus,

    #[error(transparent)]
    Neural(#[from] NeuralError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One dense vector per morpheme, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Panics unless `dim > 0` and `data.len()` is a multiple of `dim`.
    pub fn new(dim: usize, data: Vec<f32>) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        assert_eq!(data.len() % dim, 0, "data is not a whole number of rows");
        Self { dim, data }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "row width differs from dim");
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor<F: Float>(&self) -> Tensor2<F> {
        Tensor2::from_vec(
            self.rows(),
            self.dim,
            self.data.iter().map(|&x| F::of(x as f64)).collect(),
        )
    }
}

/// Mean of the subword rows in each range, one output row per range.
pub fn pool_subwords(subwords: &EmbeddingMatrix, ranges: &[Range<usize>]) -> Result<EmbeddingMatrix, ImplicitError> {
    let dim = subwords.dim();
    let mut data = Vec::with_capacity(ranges.len() * dim);
    for (index, r) in ranges.iter().enumerate() {
        if r.start >= r.end {
            return Err(ImplicitError::EmptyRange { index });
        }
        if r.end > subwords.rows() {
            return Err(ImplicitError::RangeOutOfBounds {
                index,
                start: r.start,
                end: r.end,
                rows: subwords.rows(),
            });
        }
        let mut acc = vec![0f64; dim];
        for i in r.clone() {
            for (a, &x) in acc.iter_mut().zip(subwords.row(i)) {
                *a += x as f64;
            }
        }
        let n = r.len() as f64;
        data.extend(acc.into_iter().map(|a| (a / n) as f32));
    }
    Ok(EmbeddingMatrix::new(dim, data))
}

/// Where a model's implicit features come from.
#[derive(Clone, Debug, Default)]
pub enum ImplicitProvider {
    #[default]
    None,
    /// Pre-exported vectors looked up by sentence id.
    File(EmbeddingFile),
    /// Vectors computed on the fly by a frozen character LM.
    CharLm(CharLm),
}

impl ImplicitProvider {
    /// Width added to each morpheme's input, 0 for [`ImplicitProvider::None`].
    pub fn dim(&self) -> usize {
        match self {
            ImplicitProvider::None => 0,
            ImplicitProvider::File(f) => f.dim(),
            ImplicitProvider::CharLm(lm) => lm.output_dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ImplicitProvider::None => "none",
            ImplicitProvider::File(_) => "file",
            ImplicitProvider::CharLm(_) => "charlm",
        }
    }

    /// Rows for every morpheme of `sentence`, or `None` without a provider.
    pub fn embed(&self, sentence: &Sentence) -> Result<Option<EmbeddingMatrix>, ImplicitError> {
        let m = match self {
            ImplicitProvider::None => return Ok(None),
            ImplicitProvider::File(f) => f.fetch(&sentence.id)?.clone(),
            ImplicitProvider::CharLm(lm) => charlm_embed(lm, sentence),
        };
        if m.rows() != sentence.len() {
            return Err(ImplicitError::RowCountMismatch {
                id: sentence.id.clone(),
                expected: sentence.len(),
                found: m.rows(),
            });
        }
        Ok(Some(m))
    }
}
