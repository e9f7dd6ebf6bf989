//! Binary store of per-sentence embedding matrices.
//!
//! Little-endian layout:
//!
//! ```text
//! "JTFE" | u32 version | u32 dim | u32 sentence count
//! per sentence: u32 id length | id (UTF-8) | u32 token count | token_count*dim f32
//! u64 record offset per sentence
//! u64 offset of that index
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::{EmbeddingMatrix, ImplicitError};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"JTFE";
pub const EMBEDDING_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    dim: usize,
    ids: Vec<String>,
    records: HashMap<String, EmbeddingMatrix>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ImplicitError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ImplicitError::Truncated(what.to_string()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ImplicitError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ImplicitError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

impl EmbeddingFile {
    /// Empty store for writing. Panics if `dim` is 0.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            ids: Vec::new(),
            records: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sentence ids in storage order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, id: impl Into<String>, matrix: EmbeddingMatrix) -> Result<(), ImplicitError> {
        let id = id.into();
        if matrix.dim() != self.dim {
            return Err(ImplicitError::DimMismatch { id, dim: self.dim });
        }
        if self.records.contains_key(&id) {
            return Err(ImplicitError::DuplicateId(id));
        }
        self.ids.push(id.clone());
        self.records.insert(id, matrix);
        Ok(())
    }

    pub fn fetch(&self, id: &str) -> Result<&EmbeddingMatrix, ImplicitError> {
        self.records
            .get(id)
            .ok_or_else(|| ImplicitError::UnknownSentenceId(id.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        let mut offsets = Vec::with_capacity(self.ids.len());
        for id in &self.ids {
            offsets.push(out.len() as u64);
            let m = &self.records[id];
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            for &x in m.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let index_offset = out.len() as u64;
        for o in offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&index_offset.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ImplicitError> {
        if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
            return Err(ImplicitError::BadMagic);
        }
        let mut r = Reader { buf: bytes, pos: 4 };
        let version = r.u32("version")?;
        if version != EMBEDDING_VERSION {
            return Err(ImplicitError::VersionMismatch {
                expected: EMBEDDING_VERSION,
                found: version,
            });
        }
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(ImplicitError::InvalidHeader("dim is 0".into()));
        }
        let count = r.u32("sentence count")? as usize;
        if bytes.len() < HEADER_LEN + 8 {
            return Err(ImplicitError::Truncated("index offset".into()));
        }
        let index_offset = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()) as usize;
        let index_end = count
            .checked_mul(8)
            .and_then(|n| n.checked_add(index_offset))
            .filter(|&e| e + 8 == bytes.len() && index_offset >= HEADER_LEN)
            .ok_or_else(|| ImplicitError::Truncated("record index".into()))?;
        let mut ir = Reader {
            buf: &bytes[..index_end],
            pos: index_offset,
        };
        let offsets = (0..count)
            .map(|_| ir.u64("record offset").map(|o| o as usize))
            .collect::<Result<Vec<_>, _>>()?;

        let mut file = Self::new(dim);
        for (k, &start) in offsets.iter().enumerate() {
            let end = offsets.get(k + 1).copied().unwrap_or(index_offset);
            if start < HEADER_LEN || end < start || end > index_offset {
                return Err(ImplicitError::InvalidHeader(format!("record {k} has offset {start}")));
            }
            let mut rr = Reader {
                buf: &bytes[..end],
                pos: start,
            };
            let id_len = rr.u32("id length")? as usize;
            let id = std::str::from_utf8(rr.take(id_len, "id")?)
                .map_err(|_| ImplicitError::InvalidHeader(format!("record {k} id is not UTF-8")))?
                .to_string();
            let tokens = rr.u32("token count")? as usize;
            let floats = tokens.checked_mul(dim);
            if floats.and_then(|f| f.checked_mul(4)) != Some(end - rr.pos) {
                return Err(ImplicitError::DimMismatch { id, dim });
            }
            let data: Vec<f32> = rr
                .take(end - rr.pos, "vectors")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            file.insert(id, EmbeddingMatrix::new(dim, data))?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ImplicitError> {
        let bytes = std::fs::read(path).map_err(|source| ImplicitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), ImplicitError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| ImplicitError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
